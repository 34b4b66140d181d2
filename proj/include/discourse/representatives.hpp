#pragma once

#include <map>
#include <string>
#include <vector>

#include "discourse/embedstore.hpp"

namespace discourse::representatives {

struct RepEntry {
  std::string story_id;
  size_t row = 0;  // row in the embedding matrix
  double mean_dist = 0.0;
};

struct ClusterReps {
  std::vector<RepEntry> central;     // ascending mean distance
  std::vector<RepEntry> peripheral;  // descending mean distance
};

struct RepresentativeSet {
  std::map<int, ClusterReps> per_cluster;
  int m = 3;

  size_t total_selected() const {
    size_t total = 0;
    for (const auto& [cluster, reps] : per_cluster)
      total += reps.central.size() + reps.peripheral.size();
    return total;
  }
};

// Mean Euclidean distance from each member of the cluster to the other
// members (self excluded), keyed by story id.
std::map<std::string, double> mean_intra_distances(const embedstore::EmbeddingMatrix& X,
                                                   const std::vector<int>& labels, int cluster_id);

// Per non-noise cluster: the m members with minimal and the m with maximal
// mean intra-cluster distance; ties break by story id. When a cluster has
// fewer than 2m members, central fills first and peripheral takes the rest.
// Singleton clusters are skipped with a warning.
RepresentativeSet select_representatives(const embedstore::EmbeddingMatrix& X,
                                         const std::vector<int>& labels, int m);

}  // namespace discourse::representatives
