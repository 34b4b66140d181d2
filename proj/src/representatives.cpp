#include "discourse/representatives.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "discourse/errors.hpp"

namespace discourse::representatives {

namespace {

double euclidean(const embedstore::EmbeddingMatrix& X, size_t a, size_t b) {
  const float* xa = X.row(a);
  const float* xb = X.row(b);
  double acc = 0.0;
  for (size_t t = 0; t < X.d; ++t) {
    const double diff = static_cast<double>(xa[t]) - xb[t];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

std::vector<size_t> cluster_members(const std::vector<int>& labels, int cluster_id) {
  std::vector<size_t> members;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == cluster_id) members.push_back(i);
  return members;
}

std::vector<RepEntry> member_mean_distances(const embedstore::EmbeddingMatrix& X,
                                            const std::vector<size_t>& members) {
  std::vector<RepEntry> entries(members.size());
  std::vector<double> sums(members.size(), 0.0);
  for (size_t a = 0; a < members.size(); ++a) {
    for (size_t b = a + 1; b < members.size(); ++b) {
      const double dist = euclidean(X, members[a], members[b]);
      sums[a] += dist;
      sums[b] += dist;
    }
  }
  for (size_t a = 0; a < members.size(); ++a) {
    entries[a].row = members[a];
    entries[a].story_id = X.ids[members[a]];
    entries[a].mean_dist = sums[a] / static_cast<double>(members.size() - 1);
  }
  return entries;
}

}  // namespace

std::map<std::string, double> mean_intra_distances(const embedstore::EmbeddingMatrix& X,
                                                   const std::vector<int>& labels,
                                                   int cluster_id) {
  if (labels.size() != X.n) raise(Errc::InvalidArgument, "labels/rows mismatch");
  if (cluster_id < 0) raise(Errc::UnknownCluster, "cluster id must be non-negative");
  auto members = cluster_members(labels, cluster_id);
  if (members.empty())
    raise(Errc::UnknownCluster, "no such cluster: " + std::to_string(cluster_id));
  if (members.size() < 2)
    raise(Errc::SingletonCluster,
          "cluster " + std::to_string(cluster_id) + " has a single member");

  std::map<std::string, double> out;
  for (const auto& entry : member_mean_distances(X, members))
    out[entry.story_id] = entry.mean_dist;
  return out;
}

RepresentativeSet select_representatives(const embedstore::EmbeddingMatrix& X,
                                         const std::vector<int>& labels, int m) {
  if (labels.size() != X.n) raise(Errc::InvalidArgument, "labels/rows mismatch");
  if (m < 1) raise(Errc::InvalidArgument, "m must be >= 1");

  std::set<int> cluster_ids;
  for (int label : labels)
    if (label >= 0) cluster_ids.insert(label);

  RepresentativeSet set;
  set.m = m;
  for (int cluster_id : cluster_ids) {
    auto members = cluster_members(labels, cluster_id);
    if (members.size() < 2) {
      std::cerr << "[representatives] warning: cluster " << cluster_id
                << " has a single member; skipped\n";
      continue;
    }
    auto entries = member_mean_distances(X, members);

    std::sort(entries.begin(), entries.end(), [](const RepEntry& a, const RepEntry& b) {
      if (a.mean_dist != b.mean_dist) return a.mean_dist < b.mean_dist;
      return a.story_id < b.story_id;
    });

    ClusterReps reps;
    const size_t take_central = std::min(static_cast<size_t>(m), entries.size());
    for (size_t i = 0; i < take_central; ++i) reps.central.push_back(entries[i]);

    // Peripheral picks from the remainder, so the lists never overlap.
    std::vector<RepEntry> remainder(entries.begin() + static_cast<long>(take_central),
                                    entries.end());
    std::sort(remainder.begin(), remainder.end(), [](const RepEntry& a, const RepEntry& b) {
      if (a.mean_dist != b.mean_dist) return a.mean_dist > b.mean_dist;
      return a.story_id < b.story_id;
    });
    const size_t take_peripheral = std::min(static_cast<size_t>(m), remainder.size());
    for (size_t i = 0; i < take_peripheral; ++i) reps.peripheral.push_back(remainder[i]);
    set.per_cluster[cluster_id] = std::move(reps);
  }
  return set;
}

}  // namespace discourse::representatives
