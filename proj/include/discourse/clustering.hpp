#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "discourse/embedstore.hpp"

namespace discourse::clustering {

struct DBSCANParams {
  double eps = 0.0;
  int min_pts = 1;
};
void validate(const DBSCANParams& p);

struct ClusteringResult {
  std::vector<int> labels;  // canonical 0..n_clusters-1, noise = -1
  std::string algorithm;
  nlohmann::ordered_json params;
  std::optional<double> vrc;
  int n_clusters = 0;
  std::map<int, size_t> cluster_sizes;
  size_t noise_count = 0;
};

// Renumbers non-noise labels by descending cluster size (ties: smallest
// member index); noise stays -1.
std::vector<int> canonicalize_labels(const std::vector<int>& raw);

// Classic density clustering. A point is core iff its eps-ball (inclusive,
// counting itself) holds >= min_pts points; border points attach to the first
// cluster discovered under index-order scanning.
ClusteringResult dbscan(const embedstore::EmbeddingMatrix& X, const DBSCANParams& p);

// Lloyd's algorithm with k-means++ seeding; an emptied cluster is re-seeded
// to the point farthest from its assigned center.
ClusteringResult kmeans(const embedstore::EmbeddingMatrix& X, int k, uint64_t seed,
                        int max_iter = 300);

// Variance Ratio Criterion [B/(k-1)] / [W/(n-k)]. Throws UndefinedScore when
// k < 2, n <= k, or W = 0 (after optional noise exclusion).
double vrc(const float* X, size_t n, size_t d, const std::vector<int>& labels, bool exclude_noise);
double vrc(const embedstore::EmbeddingMatrix& X, const std::vector<int>& labels,
           bool exclude_noise);

struct SearchSpace {
  std::vector<int> dbscan_min_pts{3, 5, 10, 15};
  // eps per min_pts comes from these quantiles of the k-distance distribution
  std::vector<double> dbscan_eps_quantiles{0.05, 0.10, 0.15, 0.20, 0.25,
                                           0.30, 0.35, 0.40, 0.45, 0.50};
  std::vector<int> kmeans_ks{2, 3, 4, 5, 6, 7, 8};
  int kmeans_max_iter = 300;
  uint64_t seed = 42;
};
void validate(const SearchSpace& space);

struct Trial {
  std::string algorithm;
  nlohmann::ordered_json params;
  std::optional<double> vrc;  // empty = undefined (ranked last)
  int n_clusters = 0;
  size_t noise_count = 0;
  double retained_fraction = 1.0;
  std::string note;
};

struct SearchOutcome {
  ClusteringResult best;
  std::vector<Trial> trials;  // ranked: defined by vrc desc, undefined last
};

// Evaluates every configuration; DBSCAN trials with < 2 clusters or > 50%
// noise are undefined and ranked last. Noise is excluded from the VRC. Ties
// resolve to the first configuration in enumeration order.
SearchOutcome search_clustering(const embedstore::EmbeddingMatrix& X, const SearchSpace& space);

}  // namespace discourse::clustering
