#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "privet/data.hpp"
#include "privet/knn.hpp"

namespace privet {

struct BaselineResult {
  std::string name;  // "authenticity" or "aats_privacy_loss"
  double value = 0.0;
  std::vector<bool> flags;  // authenticity only
};

// A synthetic row is inauthentic when it is strictly closer to its train NN
// than that train row is to its own nearest other train row. value is the
// In-Auth count.
BaselineResult authenticity_flags(const DataMatrix& train, const DataMatrix& synth, Metric metric);

// AA(R, S) = 1/2 [mean 1(d_RS > d_RR) + mean 1(d_SR > d_SS)], self excluded
// within a set. Ties count as not greater.
double adversarial_accuracy(const DataMatrix& reference, const DataMatrix& synth, Metric metric);

struct AatsOptions {
  // Subsample every set to the smallest size when sizes differ. Off by
  // default: unequal sizes are an error.
  bool subsample = false;
  std::uint64_t seed = 0;
};

// AA(test, synth) - AA(train, synth); positive values indicate overfitting.
BaselineResult aats_privacy_loss(const DataMatrix& train, const DataMatrix& test,
                                 const DataMatrix& synth, Metric metric,
                                 const AatsOptions& options = {});

}  // namespace privet
