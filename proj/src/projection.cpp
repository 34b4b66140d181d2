#include "discourse/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "discourse/errors.hpp"
#include "discourse/parallel.hpp"
#include "discourse/rng.hpp"

namespace discourse::projection {

const char* method_name(Method m) noexcept { return m == Method::pca ? "pca" : "umap"; }

namespace {

// One cyclic-Jacobi rotation in the (p,q) plane. A stays symmetric: rows are
// rotated in place, the 2x2 block is set analytically, columns mirrored.
void jacobi_rotate(std::vector<double>& A, std::vector<double>& Vt, size_t d, size_t p, size_t q) {
  const double apq = A[p * d + q];
  if (apq == 0.0) return;
  const double app = A[p * d + p];
  const double aqq = A[q * d + q];
  const double tau = (aqq - app) / (2.0 * apq);
  const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;

  double* rp = A.data() + p * d;
  double* rq = A.data() + q * d;
  for (size_t k = 0; k < d; ++k) {
    const double akp = rp[k];
    const double akq = rq[k];
    rp[k] = c * akp - s * akq;
    rq[k] = s * akp + c * akq;
  }
  A[p * d + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
  A[q * d + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
  A[p * d + q] = 0.0;
  A[q * d + p] = 0.0;
  for (size_t k = 0; k < d; ++k) {
    if (k == p || k == q) continue;
    A[k * d + p] = rp[k];
    A[k * d + q] = rq[k];
  }

  double* vp = Vt.data() + p * d;
  double* vq = Vt.data() + q * d;
  for (size_t k = 0; k < d; ++k) {
    const double vkp = vp[k];
    const double vkq = vq[k];
    vp[k] = c * vkp - s * vkq;
    vq[k] = s * vkp + c * vkq;
  }
}

double offdiag_norm(const std::vector<double>& A, size_t d) {
  double acc = 0.0;
  for (size_t p = 0; p < d; ++p)
    for (size_t q = p + 1; q < d; ++q) acc += A[p * d + q] * A[p * d + q];
  return std::sqrt(2.0 * acc);
}

// Diagonalizes symmetric A in place; rows of Vt are the eigenvectors.
void jacobi_eigen(std::vector<double>& A, std::vector<double>& Vt, size_t d) {
  Vt.assign(d * d, 0.0);
  for (size_t i = 0; i < d; ++i) Vt[i * d + i] = 1.0;

  double fro = 0.0;
  for (double v : A) fro += v * v;
  fro = std::sqrt(fro);
  const double tol_off = 1e-10 * (fro > 0.0 ? fro : 1.0);
  const double skip = tol_off / static_cast<double>(d);

  for (int sweep = 0; sweep < 60; ++sweep) {
    if (offdiag_norm(A, d) <= tol_off) break;
    for (size_t p = 0; p + 1 < d; ++p)
      for (size_t q = p + 1; q < d; ++q)
        if (std::abs(A[p * d + q]) > skip) jacobi_rotate(A, Vt, d, p, q);
  }
}

}  // namespace

Projection2D pca2d(const embedstore::EmbeddingMatrix& X) {
  const size_t n = X.n;
  const size_t d = X.d;
  if (n < 3) raise(Errc::InvalidArgument, "pca2d needs at least 3 points");
  if (d < 2) raise(Errc::InvalidArgument, "pca2d needs dimension >= 2");

  std::vector<double> mean(d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const float* x = X.row(i);
    for (size_t t = 0; t < d; ++t) mean[t] += x[t];
  }
  for (double& v : mean) v /= static_cast<double>(n);

  std::vector<double> centered(n * d);
  for (size_t i = 0; i < n; ++i) {
    const float* x = X.row(i);
    for (size_t t = 0; t < d; ++t) centered[i * d + t] = static_cast<double>(x[t]) - mean[t];
  }

  std::vector<double> cov(d * d, 0.0);
  parallel_for(d, [&](size_t a) {
    for (size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) acc += centered[i * d + a] * centered[i * d + b];
      acc /= static_cast<double>(n - 1);
      cov[a * d + b] = acc;
      cov[b * d + a] = acc;
    }
  });

  double trace = 0.0;
  for (size_t t = 0; t < d; ++t) trace += cov[t * d + t];
  if (trace < 1e-18) raise(Errc::DegenerateData, "all points identical; covariance has rank 0");

  std::vector<double> Vt;
  jacobi_eigen(cov, Vt, d);

  std::vector<size_t> order(d);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (cov[a * d + a] != cov[b * d + b]) return cov[a * d + a] > cov[b * d + b];
    return a < b;
  });

  Projection2D proj;
  proj.ids = X.ids;
  proj.method = Method::pca;
  proj.coords.assign(n * 2, 0.0);
  std::array<double, 2> fractions{0.0, 0.0};

  for (int comp = 0; comp < 2; ++comp) {
    const size_t e = order[static_cast<size_t>(comp)];
    std::vector<double> v(Vt.begin() + static_cast<long>(e * d),
                          Vt.begin() + static_cast<long>((e + 1) * d));
    // Sign convention: largest-magnitude entry positive (first such entry on
    // exact ties).
    size_t arg = 0;
    for (size_t t = 1; t < d; ++t)
      if (std::abs(v[t]) > std::abs(v[arg])) arg = t;
    if (v[arg] < 0.0)
      for (double& val : v) val = -val;

    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (size_t t = 0; t < d; ++t) acc += centered[i * d + t] * v[t];
      proj.coords[i * 2 + static_cast<size_t>(comp)] = acc;
    }
    fractions[static_cast<size_t>(comp)] = std::max(0.0, cov[e * d + e]) / trace;
  }
  proj.explained_variance = fractions;
  return proj;
}

// --- neighbor-graph layout --------------------------------------------------

namespace {

struct Edge {
  size_t i;
  size_t j;
  double w;
};

// Least-squares fit of 1/(1 + a x^(2b)) to the target membership curve for
// the requested min_dist (grid search with refinement).
std::pair<double, double> fit_curve(double min_dist) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (int k = 1; k <= 300; ++k) {
    const double x = 3.0 * k / 300.0;
    xs.push_back(x);
    ys.push_back(x <= min_dist ? 1.0 : std::exp(-(x - min_dist)));
  }
  auto sse = [&](double a, double b) {
    double acc = 0.0;
    for (size_t t = 0; t < xs.size(); ++t) {
      const double f = 1.0 / (1.0 + a * std::pow(xs[t], 2.0 * b));
      acc += (f - ys[t]) * (f - ys[t]);
    }
    return acc;
  };
  double best_a = 1.0;
  double best_b = 1.0;
  double lo_a = 0.05;
  double hi_a = 10.0;
  double lo_b = 0.2;
  double hi_b = 2.5;
  for (int round = 0; round < 4; ++round) {
    double best = std::numeric_limits<double>::max();
    for (int ia = 0; ia <= 40; ++ia) {
      for (int ib = 0; ib <= 40; ++ib) {
        const double a = lo_a + (hi_a - lo_a) * ia / 40.0;
        const double b = lo_b + (hi_b - lo_b) * ib / 40.0;
        const double v = sse(a, b);
        if (v < best) {
          best = v;
          best_a = a;
          best_b = b;
        }
      }
    }
    const double span_a = (hi_a - lo_a) / 8.0;
    const double span_b = (hi_b - lo_b) / 8.0;
    lo_a = std::max(0.01, best_a - span_a);
    hi_a = best_a + span_a;
    lo_b = std::max(0.1, best_b - span_b);
    hi_b = best_b + span_b;
  }
  return {best_a, best_b};
}

}  // namespace

Projection2D umap2d(const embedstore::EmbeddingMatrix& X, int n_neighbors, double min_dist,
                    uint64_t seed) {
  const size_t n = X.n;
  if (n_neighbors < 2) raise(Errc::InvalidArgument, "n_neighbors must be >= 2");
  if (static_cast<size_t>(n_neighbors) >= n)
    raise(Errc::TooFewPoints, "need more points than n_neighbors");

  const size_t k = static_cast<size_t>(n_neighbors);

  // Exact k-NN (desk scale, no spatial index).
  std::vector<size_t> knn(n * k);
  std::vector<double> knn_dist(n * k);
  parallel_for(n, [&](size_t i) {
    std::vector<std::pair<double, size_t>> dists;
    dists.reserve(n - 1);
    const float* xi = X.row(i);
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const float* xj = X.row(j);
      double acc = 0.0;
      for (size_t t = 0; t < X.d; ++t) {
        const double diff = static_cast<double>(xi[t]) - xj[t];
        acc += diff * diff;
      }
      dists.emplace_back(acc, j);
    }
    std::partial_sort(dists.begin(), dists.begin() + static_cast<long>(k), dists.end());
    for (size_t t = 0; t < k; ++t) {
      knn[i * k + t] = dists[t].second;
      knn_dist[i * k + t] = std::sqrt(dists[t].first);
    }
  });

  // Smooth-kNN calibration: per-point sigma matching log2(k) total membership.
  const double target = std::log2(static_cast<double>(k));
  std::vector<double> rho(n);
  std::vector<double> sigma(n);
  for (size_t i = 0; i < n; ++i) {
    rho[i] = knn_dist[i * k];
    double lo = 1e-8;
    double hi = 1.0;
    auto mass = [&](double s) {
      double acc = 0.0;
      for (size_t t = 0; t < k; ++t)
        acc += std::exp(-std::max(0.0, knn_dist[i * k + t] - rho[i]) / s);
      return acc;
    };
    while (mass(hi) < target && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mass(mid) >= target) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    sigma[i] = hi;
  }

  // Fuzzy union of the directed graphs.
  std::map<std::pair<size_t, size_t>, std::pair<double, double>> directed;
  for (size_t i = 0; i < n; ++i) {
    for (size_t t = 0; t < k; ++t) {
      const size_t j = knn[i * k + t];
      const double w = std::exp(-std::max(0.0, knn_dist[i * k + t] - rho[i]) / sigma[i]);
      auto key = std::minmax(i, j);
      auto& slot = directed[{key.first, key.second}];
      if (i < j) slot.first = std::max(slot.first, w);
      else slot.second = std::max(slot.second, w);
    }
  }
  std::vector<Edge> edges;
  edges.reserve(directed.size());
  double w_max = 0.0;
  for (const auto& [key, ws] : directed) {
    const double w = ws.first + ws.second - ws.first * ws.second;
    if (w <= 1e-9) continue;
    edges.push_back({key.first, key.second, w});
    w_max = std::max(w_max, w);
  }
  if (edges.empty()) raise(Errc::DegenerateData, "neighbor graph has no edges");

  // PCA initialization scaled into the usual layout range.
  Projection2D init = pca2d(X);
  std::vector<double> pos = init.coords;
  double max_abs = 1e-12;
  for (double v : pos) max_abs = std::max(max_abs, std::abs(v));
  for (double& v : pos) v *= 10.0 / max_abs;

  const auto [a, b] = fit_curve(min_dist);
  const int n_epochs = 500;
  const int negative_rate = 5;
  std::vector<double> epochs_per_sample(edges.size());
  std::vector<double> next_sample(edges.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    epochs_per_sample[e] = w_max / edges[e].w;
    next_sample[e] = epochs_per_sample[e];
  }

  SplitMix64 rng(mix_seed(seed, 0x50FA));
  auto clip4 = [](double v) { return std::clamp(v, -4.0, 4.0); };

  for (int epoch = 1; epoch <= n_epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / n_epochs;
    if (alpha <= 0.0) break;
    for (size_t e = 0; e < edges.size(); ++e) {
      if (next_sample[e] > epoch) continue;
      next_sample[e] += epochs_per_sample[e];
      const size_t i = edges[e].i;
      const size_t j = edges[e].j;

      double dx = pos[i * 2] - pos[j * 2];
      double dy = pos[i * 2 + 1] - pos[j * 2 + 1];
      double d_sq = dx * dx + dy * dy;
      if (d_sq > 0.0) {
        const double pd = std::pow(d_sq, b);
        const double coef = (-2.0 * a * b * pd / d_sq) / (1.0 + a * pd);
        const double gx = clip4(coef * dx) * alpha;
        const double gy = clip4(coef * dy) * alpha;
        pos[i * 2] += gx;
        pos[i * 2 + 1] += gy;
        pos[j * 2] -= gx;
        pos[j * 2 + 1] -= gy;
      }

      for (int neg = 0; neg < negative_rate; ++neg) {
        const size_t r = static_cast<size_t>(rng.below(n));
        if (r == i || r == j) continue;
        dx = pos[i * 2] - pos[r * 2];
        dy = pos[i * 2 + 1] - pos[r * 2 + 1];
        d_sq = dx * dx + dy * dy;
        const double pd = std::pow(d_sq, b);
        const double coef = (2.0 * b) / ((0.001 + d_sq) * (1.0 + a * pd));
        pos[i * 2] += clip4(coef * dx) * alpha;
        pos[i * 2 + 1] += clip4(coef * dy) * alpha;
      }
    }
  }

  Projection2D proj;
  proj.ids = X.ids;
  proj.method = Method::umap;
  proj.coords = std::move(pos);
  return proj;
}

}  // namespace discourse::projection
