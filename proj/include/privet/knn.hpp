#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "privet/data.hpp"

namespace privet {

enum class Metric { hamming, euclidean };

const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);

// Unsorted per-query result: nearest reference row and its distance.
struct Neighbors {
  std::vector<std::size_t> index;
  Eigen::VectorXd distance;
};

// Sorted 1-NN distances with provenance. permutation[k] is the query row
// holding rank k (0-based); rank_of is its inverse.
struct NNDistanceSet {
  Eigen::VectorXd distances;
  std::vector<std::size_t> permutation;
  std::vector<std::size_t> rank_of;
  std::string query_label;
  std::string reference_label;
  bool exclude_self = false;
  std::size_t n_query = 0;
  std::size_t n_reference = 0;

  std::size_t size() const { return static_cast<std::size_t>(distances.size()); }
  // Number of candidate neighbors each query row was compared against.
  std::size_t effective_reference() const { return n_reference - (exclude_self ? 1 : 0); }
  // Distance of the given query row.
  double of_row(std::size_t row) const { return distances[static_cast<Eigen::Index>(rank_of[row])]; }
};

// Stable sort of per-row distances; ties keep query-row order.
NNDistanceSet make_distance_set(const Eigen::VectorXd& per_row, std::string query_label,
                                std::string reference_label, bool exclude_self,
                                std::size_t n_reference);

// Restrict to the query rows with keep[row] set. Rows are renumbered
// 0..k-1 in their original order.
NNDistanceSet subset(const NNDistanceSet& set, const std::vector<bool>& keep);

// Exact 1-NN search. With exclude_self the query and reference must be the
// same matrix and row i never matches itself.
Neighbors nearest_neighbors(const DataMatrix& query, const DataMatrix& reference, Metric metric,
                            bool exclude_self = false);

NNDistanceSet nn_distances(const DataMatrix& query, const DataMatrix& reference, Metric metric,
                           bool exclude_self = false, std::string query_label = "query",
                           std::string reference_label = "reference");

NNDistanceSet pairwise_min_profile(const DataMatrix& set, Metric metric,
                                   std::string label = "set");

// Direct distance between two rows, used by the exact recompute step.
double row_distance(const DataMatrix& a, std::size_t i, const DataMatrix& b, std::size_t j,
                    Metric metric);

}  // namespace privet
