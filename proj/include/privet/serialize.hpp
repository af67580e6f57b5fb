#pragma once

#include <json.hpp>

#include "privet/evt.hpp"
#include "privet/pipeline.hpp"

namespace privet {

inline constexpr const char* kReportSchema = "privet.report/1";
inline constexpr const char* kFitSchema = "privet.tailfit/1";

// Finite values as numbers, others as the strings "nan", "inf", "-inf".
nlohmann::json json_number(double v);
nlohmann::json json_number(const std::optional<double>& v);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TailFit& fit);
TailFit tailfit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PrivetConfig& config);
nlohmann::json to_json(const PrivacyReport& report, bool include_timing = false);

}  // namespace privet
