#include "privet/serialize.hpp"

#include <cmath>

#include "privet/error.hpp"

namespace privet {

using nlohmann::json;

json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json json_number(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw ValidationError("expected a number in JSON document");
}

json to_json(const TailFit& fit) {
  return {{"schema", kFitSchema},
          {"family", to_string(fit.family)},
          {"log_A", json_number(fit.log_A)},
          {"A", json_number(fit.A())},
          {"shape", json_number(fit.shape)},
          {"window",
           {{"a_frac", fit.window.a_frac},
            {"q_frac", fit.window.q_frac},
            {"lower", json_number(fit.lower)},
            {"upper", json_number(fit.upper)}}},
          {"n_reference", fit.n_reference},
          {"likelihood", to_string(fit.likelihood)},
          {"nll", json_number(fit.nll)},
          {"m", fit.m}};
}

TailFit tailfit_from_json(const json& j) {
  try {
    if (j.value("schema", std::string()) != kFitSchema)
      throw ValidationError("not a tail fit document (schema mismatch)");
    TailFit f;
    f.family = family_from_string(j.at("family").get<std::string>());
    f.log_A = number_from_json(j.at("log_A"));
    f.shape = number_from_json(j.at("shape"));
    const json& w = j.at("window");
    f.window.a_frac = w.at("a_frac").get<double>();
    f.window.q_frac = w.at("q_frac").get<double>();
    f.lower = number_from_json(w.at("lower"));
    f.upper = number_from_json(w.at("upper"));
    f.n_reference = j.at("n_reference").get<std::size_t>();
    f.nll = number_from_json(j.at("nll"));
    f.likelihood = likelihood_from_string(j.value("likelihood", std::string("censored")));
    f.m = j.at("m").get<std::size_t>();
    if (!(std::isfinite(f.log_A) && f.shape > 0 && std::isfinite(f.shape) && f.n_reference > 0))
      throw ValidationError("tail fit parameters must be finite and positive");
    return f;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed tail fit document: ") + e.what());
  }
}

json to_json(const PrivetConfig& c) {
  return {{"metric", to_string(c.metric)},
          {"a_frac", c.window.a_frac},
          {"q_frac", c.window.q_frac},
          {"family",
           c.family == FamilyChoice::best ? "best"
                                          : (c.family == FamilyChoice::weibull ? "weibull"
                                                                               : "gumbel")},
          {"likelihood", to_string(c.likelihood)},
          {"tau", c.tau},
          {"flag_score", to_string(c.flag_score)},
          {"tau_delta_p", c.tau_delta_p},
          {"decimate", c.decimate},
          {"rescale", c.rescale},
          {"regime_tolerance", c.regime_tolerance}};
}

json to_json(const PrivacyReport& r, bool include_timing) {
  json g = {{"mean_delta_pi", json_number(r.global.mean_delta_pi)},
            {"npl", r.global.npl},
            {"n_undefined", r.global.n_undefined},
            {"max_n_overfit", r.global.max_n_overfit},
            {"max_n_pleaks", r.global.max_n_pleaks},
            {"decimation_rounds", r.global.decimation_rounds}};
  json j = {{"schema", kReportSchema},
            {"config", to_json(r.config)},
            {"privacy_score", r.has_test},
            {"sizes", {{"train", r.n_train}, {"test", r.n_test}, {"synth", r.n_synth}}},
            {"fit", to_json(r.fit)},
            {"train_fit", to_json(r.train_fit)},
            {"test_fit", r.test_fit ? to_json(*r.test_fit) : json(nullptr)},
            {"regime",
             {{"label", to_string(r.regime.regime)},
              {"offset_train", json_number(r.regime.offset_train)},
              {"offset_test", json_number(r.regime.offset_test)},
              {"tolerance", r.regime.tolerance}}},
            {"global", g},
            {"warnings", r.warnings}};
  if (!r.has_test) j["banner"] = "no privacy score: test set absent, overfitting-only mode";
  if (include_timing)
    j["timing_ms"] = {{"knn", r.timing.knn_ms},
                      {"fit", r.timing.fit_ms},
                      {"score", r.timing.score_ms},
                      {"decimate", r.timing.decimate_ms}};
  return j;
}

}  // namespace privet
