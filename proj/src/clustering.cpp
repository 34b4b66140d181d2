#include "discourse/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "discourse/errors.hpp"
#include "discourse/parallel.hpp"
#include "discourse/rng.hpp"

namespace discourse::clustering {

using nlohmann::ordered_json;

void validate(const DBSCANParams& p) {
  if (p.eps <= 0.0) raise(Errc::InvalidConfig, "eps must be positive");
  if (p.min_pts < 1) raise(Errc::InvalidConfig, "min_pts must be >= 1");
}

void validate(const SearchSpace& space) {
  const bool has_dbscan = !space.dbscan_min_pts.empty() && !space.dbscan_eps_quantiles.empty();
  const bool has_kmeans = !space.kmeans_ks.empty();
  if (!has_dbscan && !has_kmeans) raise(Errc::InvalidConfig, "clustering search space is empty");
  for (int mp : space.dbscan_min_pts)
    if (mp < 1) raise(Errc::InvalidConfig, "min_pts must be >= 1");
  for (double q : space.dbscan_eps_quantiles)
    if (q < 0.0 || q > 1.0) raise(Errc::InvalidConfig, "eps quantiles must lie in [0,1]");
  for (int k : space.kmeans_ks)
    if (k < 2) raise(Errc::InvalidConfig, "kmeans k must be >= 2");
  if (space.kmeans_max_iter < 1) raise(Errc::InvalidConfig, "kmeans_max_iter must be >= 1");
}

std::vector<int> canonicalize_labels(const std::vector<int>& raw) {
  struct Info {
    int raw_label;
    size_t size = 0;
    size_t first_index = 0;
  };
  std::map<int, Info> clusters;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0) continue;
    auto [it, inserted] = clusters.try_emplace(raw[i], Info{raw[i], 0, i});
    ++it->second.size;
  }
  std::vector<Info> ordered;
  ordered.reserve(clusters.size());
  for (const auto& [label, info] : clusters) ordered.push_back(info);
  std::sort(ordered.begin(), ordered.end(), [](const Info& a, const Info& b) {
    if (a.size != b.size) return a.size > b.size;
    return a.first_index < b.first_index;
  });
  std::map<int, int> remap;
  for (size_t rank = 0; rank < ordered.size(); ++rank)
    remap[ordered[rank].raw_label] = static_cast<int>(rank);

  std::vector<int> out(raw.size(), -1);
  for (size_t i = 0; i < raw.size(); ++i)
    if (raw[i] >= 0) out[i] = remap[raw[i]];
  return out;
}

namespace {

std::vector<double> pairwise_sq_distances(const embedstore::EmbeddingMatrix& X) {
  const size_t n = X.n;
  std::vector<double> dist_sq(n * n, 0.0);
  parallel_for(n, [&](size_t i) {
    const float* xi = X.row(i);
    for (size_t j = 0; j < i; ++j) {
      const float* xj = X.row(j);
      double acc = 0.0;
      for (size_t k = 0; k < X.d; ++k) {
        const double diff = static_cast<double>(xi[k]) - xj[k];
        acc += diff * diff;
      }
      dist_sq[i * n + j] = acc;
      dist_sq[j * n + i] = acc;
    }
  });
  return dist_sq;
}

constexpr int kUnassigned = -2;

std::vector<int> dbscan_impl(const std::vector<double>& dist_sq, size_t n, double eps,
                             int min_pts) {
  const double eps_sq = eps * eps;
  std::vector<char> core(n, 0);
  for (size_t i = 0; i < n; ++i) {
    int count = 0;
    for (size_t j = 0; j < n; ++j)
      if (dist_sq[i * n + j] <= eps_sq) ++count;  // includes i itself
    core[i] = count >= min_pts;
  }

  std::vector<int> labels(n, kUnassigned);
  int next_cluster = 0;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnassigned) continue;
    if (!core[i]) {
      labels[i] = -1;  // provisional noise; a later cluster may claim it as border
      continue;
    }
    const int c = next_cluster++;
    labels[i] = c;
    std::deque<size_t> queue{i};
    while (!queue.empty()) {
      const size_t p = queue.front();
      queue.pop_front();
      if (!core[p]) continue;
      for (size_t q = 0; q < n; ++q) {
        if (dist_sq[p * n + q] > eps_sq) continue;
        if (labels[q] == kUnassigned) {
          labels[q] = c;
          queue.push_back(q);
        } else if (labels[q] == -1) {
          labels[q] = c;  // border point
        }
      }
    }
  }
  return labels;
}

ClusteringResult finish_result(std::vector<int> canonical, std::string algorithm,
                               ordered_json params) {
  ClusteringResult result;
  result.labels = std::move(canonical);
  result.algorithm = std::move(algorithm);
  result.params = std::move(params);
  for (int label : result.labels) {
    if (label < 0) {
      ++result.noise_count;
    } else {
      ++result.cluster_sizes[label];
    }
  }
  result.n_clusters = static_cast<int>(result.cluster_sizes.size());
  return result;
}

}  // namespace

ClusteringResult dbscan(const embedstore::EmbeddingMatrix& X, const DBSCANParams& p) {
  validate(p);
  const auto dist_sq = pairwise_sq_distances(X);
  auto raw = dbscan_impl(dist_sq, X.n, p.eps, p.min_pts);
  return finish_result(canonicalize_labels(raw), "dbscan",
                       ordered_json{{"eps", p.eps}, {"min_pts", p.min_pts}});
}

ClusteringResult kmeans(const embedstore::EmbeddingMatrix& X, int k, uint64_t seed, int max_iter) {
  const size_t n = X.n;
  const size_t d = X.d;
  if (k < 2) raise(Errc::InvalidArgument, "k must be >= 2");
  if (static_cast<size_t>(k) > n)
    raise(Errc::KTooLarge, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));

  SplitMix64 rng(seed);
  const size_t kk = static_cast<size_t>(k);
  std::vector<double> centers(kk * d);
  auto point_center_sq = [&](size_t i, size_t c) {
    const float* x = X.row(i);
    const double* mu = centers.data() + c * d;
    double acc = 0.0;
    for (size_t t = 0; t < d; ++t) {
      const double diff = static_cast<double>(x[t]) - mu[t];
      acc += diff * diff;
    }
    return acc;
  };

  // k-means++ seeding
  {
    size_t first = static_cast<size_t>(rng.below(n));
    for (size_t t = 0; t < d; ++t) centers[t] = X.row(first)[t];
    std::vector<double> best_sq(n, std::numeric_limits<double>::max());
    for (size_t c = 1; c < kk; ++c) {
      double total = 0.0;
      for (size_t i = 0; i < n; ++i) {
        best_sq[i] = std::min(best_sq[i], point_center_sq(i, c - 1));
        total += best_sq[i];
      }
      size_t chosen;
      if (total <= 0.0) {
        chosen = static_cast<size_t>(rng.below(n));
      } else {
        const double target = rng.unit() * total;
        double cum = 0.0;
        chosen = n - 1;
        for (size_t i = 0; i < n; ++i) {
          cum += best_sq[i];
          if (cum >= target) {
            chosen = i;
            break;
          }
        }
      }
      for (size_t t = 0; t < d; ++t) centers[c * d + t] = X.row(chosen)[t];
    }
  }

  std::vector<int> assign(n, -1);
  std::vector<double> assigned_sq(n, 0.0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_val = point_center_sq(i, 0);
      for (size_t c = 1; c < kk; ++c) {
        const double v = point_center_sq(i, c);
        if (v < best_val) {
          best_val = v;
          best = static_cast<int>(c);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
      assigned_sq[i] = best_val;
    }

    std::vector<double> sums(kk * d, 0.0);
    std::vector<size_t> counts(kk, 0);
    for (size_t i = 0; i < n; ++i) {
      const float* x = X.row(i);
      double* s = sums.data() + static_cast<size_t>(assign[i]) * d;
      for (size_t t = 0; t < d; ++t) s[t] += x[t];
      ++counts[static_cast<size_t>(assign[i])];
    }
    for (size_t c = 0; c < kk; ++c) {
      if (counts[c] == 0) {
        // Re-seed an emptied cluster to the point farthest from its center.
        size_t farthest = 0;
        double worst = -1.0;
        for (size_t i = 0; i < n; ++i) {
          if (assigned_sq[i] > worst) {
            worst = assigned_sq[i];
            farthest = i;
          }
        }
        for (size_t t = 0; t < d; ++t) centers[c * d + t] = X.row(farthest)[t];
        changed = true;
      } else {
        for (size_t t = 0; t < d; ++t)
          centers[c * d + t] = sums[c * d + t] / static_cast<double>(counts[c]);
      }
    }
    if (!changed) break;
  }

  return finish_result(canonicalize_labels(assign), "kmeans",
                       ordered_json{{"k", k}, {"seed", seed}, {"max_iter", max_iter}});
}

double vrc(const float* X, size_t n, size_t d, const std::vector<int>& labels,
           bool exclude_noise) {
  if (labels.size() != n) raise(Errc::InvalidArgument, "labels/rows mismatch");
  std::vector<size_t> keep;
  keep.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) {
      if (!exclude_noise)
        raise(Errc::InvalidArgument, "negative label present; pass exclude_noise=true");
      continue;
    }
    keep.push_back(i);
  }
  const size_t m = keep.size();

  std::map<int, size_t> cluster_of;
  for (size_t i : keep) cluster_of.try_emplace(labels[i], cluster_of.size());
  const size_t k = cluster_of.size();
  if (k < 2) raise(Errc::UndefinedScore, "needs at least 2 clusters, got " + std::to_string(k));
  if (m <= k) raise(Errc::UndefinedScore, "needs more points than clusters");

  std::vector<double> mean(d, 0.0);
  std::vector<double> cluster_mean(k * d, 0.0);
  std::vector<size_t> cluster_n(k, 0);
  for (size_t i : keep) {
    const float* x = X + i * d;
    const size_t c = cluster_of[labels[i]];
    ++cluster_n[c];
    for (size_t t = 0; t < d; ++t) {
      mean[t] += x[t];
      cluster_mean[c * d + t] += x[t];
    }
  }
  for (size_t t = 0; t < d; ++t) mean[t] /= static_cast<double>(m);
  for (size_t c = 0; c < k; ++c)
    for (size_t t = 0; t < d; ++t) cluster_mean[c * d + t] /= static_cast<double>(cluster_n[c]);

  double between = 0.0;
  for (size_t c = 0; c < k; ++c) {
    double acc = 0.0;
    for (size_t t = 0; t < d; ++t) {
      const double diff = cluster_mean[c * d + t] - mean[t];
      acc += diff * diff;
    }
    between += static_cast<double>(cluster_n[c]) * acc;
  }
  double within = 0.0;
  for (size_t i : keep) {
    const float* x = X + i * d;
    const double* mu = cluster_mean.data() + cluster_of[labels[i]] * d;
    for (size_t t = 0; t < d; ++t) {
      const double diff = static_cast<double>(x[t]) - mu[t];
      within += diff * diff;
    }
  }
  if (within == 0.0) raise(Errc::UndefinedScore, "within-cluster dispersion is zero");

  return (between / static_cast<double>(k - 1)) /
         (within / static_cast<double>(m - k));
}

double vrc(const embedstore::EmbeddingMatrix& X, const std::vector<int>& labels,
           bool exclude_noise) {
  return vrc(X.data.data(), X.n, X.d, labels, exclude_noise);
}

namespace {

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  if (values.empty()) return 0.0;
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

SearchOutcome search_clustering(const embedstore::EmbeddingMatrix& X, const SearchSpace& space) {
  validate(space);
  const size_t n = X.n;
  if (n == 0) raise(Errc::InvalidArgument, "empty embedding matrix");
  const auto dist_sq = pairwise_sq_distances(X);

  SearchOutcome outcome;
  bool have_best = false;
  double best_vrc = 0.0;
  std::vector<int> best_labels;
  std::string best_algorithm;
  ordered_json best_params;

  auto consider = [&](const std::vector<int>& canonical, const std::string& algorithm,
                      const ordered_json& params, Trial& trial) {
    std::map<int, size_t> sizes;
    for (int label : canonical) {
      if (label < 0) {
        ++trial.noise_count;
      } else {
        ++sizes[label];
      }
    }
    trial.algorithm = algorithm;
    trial.params = params;
    trial.n_clusters = static_cast<int>(sizes.size());
    trial.retained_fraction =
        static_cast<double>(n - trial.noise_count) / static_cast<double>(n);

    if (algorithm == "dbscan") {
      if (trial.n_clusters < 2) {
        trial.note = "undefined: fewer than 2 clusters";
        return;
      }
      if (trial.noise_count * 2 > n) {
        trial.note = "undefined: more than 50% noise";
        return;
      }
    }
    try {
      trial.vrc = vrc(X, canonical, /*exclude_noise=*/true);
    } catch (const Error& e) {
      if (e.code() != Errc::UndefinedScore) throw;
      trial.note = std::string("undefined: ") + e.what();
      return;
    }
    if (!have_best || *trial.vrc > best_vrc) {
      have_best = true;
      best_vrc = *trial.vrc;
      best_labels = canonical;
      best_algorithm = algorithm;
      best_params = params;
    }
  };

  for (int min_pts : space.dbscan_min_pts) {
    // k-distance: radius of the ball around each point that holds min_pts
    // points including the point itself.
    std::vector<double> kdist(n, 0.0);
    if (min_pts > 1) {
      parallel_for(n, [&](size_t i) {
        std::vector<double> row(dist_sq.begin() + static_cast<long>(i * n),
                                dist_sq.begin() + static_cast<long>((i + 1) * n));
        const size_t rank = std::min(static_cast<size_t>(min_pts - 1), n - 1);
        std::nth_element(row.begin(), row.begin() + static_cast<long>(rank), row.end());
        kdist[i] = std::sqrt(row[rank]);
      });
    }
    for (double q : space.dbscan_eps_quantiles) {
      const double eps = quantile(kdist, q);
      Trial trial;
      ordered_json params{{"eps", eps}, {"min_pts", min_pts}, {"eps_quantile", q}};
      if (eps <= 0.0) {
        trial.algorithm = "dbscan";
        trial.params = params;
        trial.n_clusters = 0;
        trial.noise_count = n;
        trial.retained_fraction = 0.0;
        trial.note = "undefined: eps quantile collapsed to 0";
        outcome.trials.push_back(std::move(trial));
        continue;
      }
      auto canonical = canonicalize_labels(dbscan_impl(dist_sq, n, eps, min_pts));
      consider(canonical, "dbscan", params, trial);
      outcome.trials.push_back(std::move(trial));
    }
  }

  for (int k : space.kmeans_ks) {
    Trial trial;
    if (static_cast<size_t>(k) > n) {
      trial.algorithm = "kmeans";
      trial.params = ordered_json{{"k", k}};
      trial.note = "undefined: k exceeds n";
      outcome.trials.push_back(std::move(trial));
      continue;
    }
    const uint64_t seed = mix_seed(space.seed, 0x4B0000 + static_cast<uint64_t>(k));
    auto result = kmeans(X, k, seed, space.kmeans_max_iter);
    consider(result.labels, "kmeans", result.params, trial);
    outcome.trials.push_back(std::move(trial));
  }

  if (!have_best)
    raise(Errc::NoValidTrial, "every clustering configuration produced an undefined score");

  // Note ties on the winner: first in enumeration order is kept.
  size_t tie_count = 0;
  for (const auto& trial : outcome.trials)
    if (trial.vrc && *trial.vrc == best_vrc) ++tie_count;
  for (auto& trial : outcome.trials) {
    if (trial.vrc && *trial.vrc == best_vrc) {
      if (tie_count > 1)
        trial.note = "selected (vrc tied with " + std::to_string(tie_count - 1) +
                     " other trial(s); first in enumeration order wins)";
      else
        trial.note = "selected";
      break;
    }
  }

  std::stable_sort(outcome.trials.begin(), outcome.trials.end(),
                   [](const Trial& a, const Trial& b) {
                     if (a.vrc.has_value() != b.vrc.has_value()) return a.vrc.has_value();
                     if (a.vrc && b.vrc && *a.vrc != *b.vrc) return *a.vrc > *b.vrc;
                     return false;  // stable: enumeration order breaks ties
                   });

  outcome.best = finish_result(std::move(best_labels), std::move(best_algorithm),
                               std::move(best_params));
  outcome.best.vrc = best_vrc;
  return outcome;
}

}  // namespace discourse::clustering
