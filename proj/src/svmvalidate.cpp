#include "discourse/svmvalidate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "discourse/errors.hpp"
#include "discourse/hashing.hpp"
#include "discourse/parallel.hpp"
#include "discourse/rng.hpp"

namespace discourse::svmvalidate {

using nlohmann::ordered_json;

const char* kernel_kind_name(KernelKind kind) noexcept {
  switch (kind) {
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::rbf: return "rbf";
  }
  return "unknown";
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "polynomial" || name == "poly") return KernelKind::polynomial;
  if (name == "rbf" || name == "gaussian") return KernelKind::rbf;
  raise(Errc::InvalidConfig, "unknown kernel: " + name);
}

void validate(const KernelSpec& spec) {
  if (spec.degree <= 0) raise(Errc::InvalidConfig, "polynomial degree must be positive");
  if (spec.gamma && *spec.gamma <= 0.0) raise(Errc::InvalidConfig, "gamma must be positive");
}

void validate(const SVMConfig& cfg) {
  if (cfg.C <= 0.0) raise(Errc::InvalidConfig, "C must be positive");
  if (cfg.tol <= 0.0) raise(Errc::InvalidConfig, "tol must be positive");
  if (cfg.max_passes <= 0) raise(Errc::InvalidConfig, "max_passes must be positive");
  if (cfg.max_iter < 0) raise(Errc::InvalidConfig, "max_iter must be non-negative");
  validate(cfg.kernel);
}

namespace {

double ipow(double base, int exp) {
  double r = 1.0;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

double dot_f(std::span<const float> x, std::span<const float> y) {
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * y[i];
  return acc;
}

// Full n×n dot-product matrix; polynomial and rbf Grams are cheap elementwise
// transforms of it.
std::vector<double> dot_gram(const float* X, size_t n, size_t d) {
  std::vector<double> dots(n * n);
  parallel_for(n, [&](size_t i) {
    const float* xi = X + i * d;
    for (size_t j = 0; j <= i; ++j) {
      const float* xj = X + j * d;
      double acc = 0.0;
      for (size_t k = 0; k < d; ++k) acc += static_cast<double>(xi[k]) * xj[k];
      dots[i * n + j] = acc;
      dots[j * n + i] = acc;
    }
  });
  return dots;
}

std::vector<double> kernel_gram_from_dots(const std::vector<double>& dots, size_t n, size_t d,
                                          const KernelSpec& spec) {
  std::vector<double> gram(n * n);
  const double g = spec.resolve_gamma(d);
  parallel_for(n, [&](size_t i) {
    const double dii = dots[i * n + i];
    for (size_t j = 0; j < n; ++j) {
      const double z = dots[i * n + j];
      switch (spec.kind) {
        case KernelKind::linear: gram[i * n + j] = z; break;
        case KernelKind::polynomial: gram[i * n + j] = ipow(g * z + spec.coef0, spec.degree); break;
        case KernelKind::rbf: {
          double sq = dii + dots[j * n + j] - 2.0 * z;
          gram[i * n + j] = std::exp(-g * std::max(0.0, sq));
          break;
        }
      }
    }
  });
  return gram;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size())
    raise(Errc::DimensionMismatch, "kernel arguments have sizes " + std::to_string(x.size()) +
                                       " and " + std::to_string(y.size()));
  validate(spec);
  const double g = spec.resolve_gamma(x.size());
  switch (spec.kind) {
    case KernelKind::linear: return dot_f(x, y);
    case KernelKind::polynomial: return ipow(g * dot_f(x, y) + spec.coef0, spec.degree);
    case KernelKind::rbf: {
      double sq = 0.0;
      for (size_t i = 0; i < x.size(); ++i) {
        double diff = static_cast<double>(x[i]) - y[i];
        sq += diff * diff;
      }
      return std::exp(-g * sq);
    }
  }
  raise(Errc::InvalidArgument, "unreachable kernel kind");
}

SmoResult smo_solve(const GramProblem& problem, const SVMConfig& cfg) {
  validate(cfg);
  const size_t m = problem.size();
  if (m < 2) raise(Errc::InvalidArgument, "need at least 2 training points");
  const double C = cfg.C;
  const double tol = cfg.tol;
  const long long max_updates =
      cfg.max_iter > 0 ? cfg.max_iter : 10 * static_cast<long long>(m);

  SmoResult res;
  res.alpha.assign(m, 0.0);
  res.bias = 0.0;
  std::vector<double> f(m, 0.0);  // decision values without bias
  SplitMix64 rng(cfg.seed);

  auto refresh_f = [&]() {
    std::fill(f.begin(), f.end(), 0.0);
    for (size_t j = 0; j < m; ++j) {
      if (res.alpha[j] == 0.0) continue;
      const double w = res.alpha[j] * problem.y[j];
      for (size_t t = 0; t < m; ++t) f[t] += w * problem.k(j, t);
    }
  };

  auto try_step = [&](size_t i, size_t j, double Ei) -> bool {
    const double Ej = f[j] + res.bias - problem.y[j];
    const double ai = res.alpha[i];
    const double aj = res.alpha[j];
    const int yi = problem.y[i];
    const int yj = problem.y[j];
    double L;
    double H;
    if (yi != yj) {
      L = std::max(0.0, aj - ai);
      H = std::min(C, C + aj - ai);
    } else {
      L = std::max(0.0, ai + aj - C);
      H = std::min(C, ai + aj);
    }
    if (L >= H) return false;
    const double eta = problem.k(i, i) + problem.k(j, j) - 2.0 * problem.k(i, j);
    if (eta <= 0.0) return false;
    double aj_new = aj + yj * (Ei - Ej) / eta;
    aj_new = std::clamp(aj_new, L, H);
    if (std::abs(aj_new - aj) < 1e-10 * (std::abs(aj_new) + std::abs(aj) + 1e-3)) return false;
    double ai_new = ai + yi * yj * (aj - aj_new);
    ai_new = std::clamp(ai_new, 0.0, C);

    const double di = yi * (ai_new - ai);
    const double dj = yj * (aj_new - aj);
    const double b1 = res.bias - Ei - di * problem.k(i, i) - dj * problem.k(i, j);
    const double b2 = res.bias - Ej - di * problem.k(i, j) - dj * problem.k(j, j);
    if (ai_new > 0.0 && ai_new < C) {
      res.bias = b1;
    } else if (aj_new > 0.0 && aj_new < C) {
      res.bias = b2;
    } else {
      res.bias = 0.5 * (b1 + b2);
    }
    res.alpha[i] = ai_new;
    res.alpha[j] = aj_new;
    for (size_t t = 0; t < m; ++t) f[t] += di * problem.k(i, t) + dj * problem.k(j, t);
    return true;
  };

  int quiescent = 0;
  bool budget_exhausted = false;
  while (quiescent < cfg.max_passes && !budget_exhausted) {
    ++res.sweeps;
    long long changed = 0;
    for (size_t i = 0; i < m && !budget_exhausted; ++i) {
      const double Ei = f[i] + res.bias - problem.y[i];
      const double r = problem.y[i] * Ei;
      if (!((r < -tol && res.alpha[i] < C) || (r > tol && res.alpha[i] > 0.0))) continue;
      const size_t start = rng.below(m);
      for (size_t off = 0; off < m; ++off) {
        const size_t j = (start + off) % m;
        if (j == i) continue;
        if (try_step(i, j, Ei)) {
          ++changed;
          ++res.updates;
          if (res.updates % 1024 == 0) refresh_f();  // bound incremental drift
          if (res.updates >= max_updates) budget_exhausted = true;
          break;
        }
      }
    }
    quiescent = changed == 0 ? quiescent + 1 : 0;
  }

  refresh_f();
  double worst = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const double yf = problem.y[i] * (f[i] + res.bias);
    double v = 0.0;
    if (res.alpha[i] <= 0.0) {
      v = 1.0 - yf;
    } else if (res.alpha[i] >= C) {
      v = yf - 1.0;
    } else {
      v = std::abs(yf - 1.0);
    }
    worst = std::max(worst, v);
  }
  res.converged = worst <= tol;
  return res;
}

double kkt_max_violation(const GramProblem& problem, const SmoResult& result, double C) {
  const size_t m = problem.size();
  double worst = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double fi = result.bias;
    for (size_t j = 0; j < m; ++j)
      if (result.alpha[j] != 0.0) fi += result.alpha[j] * problem.y[j] * problem.k(j, i);
    const double yf = problem.y[i] * fi;
    double v = 0.0;
    if (result.alpha[i] <= 0.0) {
      v = 1.0 - yf;
    } else if (result.alpha[i] >= C) {
      v = yf - 1.0;
    } else {
      v = std::abs(yf - 1.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

double sum_alpha_y(const GramProblem& problem, const std::vector<double>& alpha) {
  double s = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * problem.y[i];
  return s;
}

SVMModel train_svm(const float* X, size_t n, size_t d, const std::vector<int>& y,
                   const SVMConfig& cfg) {
  if (n < 2) raise(Errc::InvalidArgument, "need at least 2 training points");
  if (y.size() != n) raise(Errc::InvalidArgument, "labels/rows mismatch");
  bool has_pos = false;
  bool has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else raise(Errc::InvalidArgument, "labels must be -1 or +1");
  }
  if (!has_pos || !has_neg) raise(Errc::SingleClass, "training data contains a single class");

  auto dots = dot_gram(X, n, d);
  auto gram = kernel_gram_from_dots(dots, n, d, cfg.kernel);
  GramProblem problem;
  problem.gram = &gram;
  problem.stride = n;
  problem.idx.resize(n);
  std::iota(problem.idx.begin(), problem.idx.end(), size_t{0});
  problem.y = y;

  SmoResult res = smo_solve(problem, cfg);
  if (!res.converged)
    std::cerr << "[svm] DidNotConverge: update budget exhausted after " << res.updates
              << " updates; returning the current model\n";

  SVMModel model;
  model.d = d;
  model.config = cfg;
  // Pin the data-dependent gamma default so predictions use the same value.
  if (!model.config.kernel.gamma) model.config.kernel.gamma = cfg.kernel.resolve_gamma(d);
  model.bias = res.bias;
  model.converged = res.converged;
  for (size_t i = 0; i < n; ++i) {
    if (res.alpha[i] <= 0.0) continue;
    model.dual_coefs.push_back(res.alpha[i] * y[i]);
    model.support_vectors.insert(model.support_vectors.end(), X + i * d, X + (i + 1) * d);
  }
  model.n_sv = model.dual_coefs.size();
  return model;
}

double decision_value(const SVMModel& model, std::span<const float> x) {
  if (x.size() != model.d)
    raise(Errc::DimensionMismatch, "probe has dimension " + std::to_string(x.size()) +
                                       ", model expects " + std::to_string(model.d));
  double acc = model.bias;
  for (size_t i = 0; i < model.n_sv; ++i) {
    std::span<const float> sv(model.support_vectors.data() + i * model.d, model.d);
    acc += model.dual_coefs[i] * kernel_eval(model.config.kernel, sv, x);
  }
  return acc;
}

int predict(const SVMModel& model, std::span<const float> x) {
  return decision_value(model, x) >= 0.0 ? 1 : -1;
}

std::vector<std::vector<size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                  uint64_t seed) {
  if (k < 1) raise(Errc::InvalidArgument, "k must be >= 1");
  std::vector<int> class_values;
  std::vector<std::vector<size_t>> members;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(class_values.begin(), class_values.end(), labels[i]);
    size_t c;
    if (it == class_values.end()) {
      c = class_values.size();
      class_values.push_back(labels[i]);
      members.emplace_back();
    } else {
      c = static_cast<size_t>(it - class_values.begin());
    }
    members[c].push_back(i);
  }
  for (size_t c = 0; c < members.size(); ++c) {
    if (members[c].size() < static_cast<size_t>(k))
      raise(Errc::TooFewPerClass, "class " + std::to_string(class_values[c]) + " has " +
                                      std::to_string(members[c].size()) + " members, needs >= " +
                                      std::to_string(k));
  }

  std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
  for (size_t c = 0; c < members.size(); ++c) {
    SplitMix64 rng(mix_seed(seed, 0xF01D + c));
    rng.shuffle(members[c]);
    const size_t offset = rng.below(static_cast<uint64_t>(k));
    for (size_t pos = 0; pos < members[c].size(); ++pos)
      folds[(offset + pos) % static_cast<size_t>(k)].push_back(members[c][pos]);
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

namespace {

// Content-based canonical row order: the grid report must not depend on how
// the corpus happened to be shuffled on disk.
std::vector<size_t> canonical_order(const embedstore::EmbeddingMatrix& X,
                                    const std::vector<int>& y) {
  std::vector<uint64_t> hashes(X.n);
  for (size_t i = 0; i < X.n; ++i)
    hashes[i] = fnv1a64(X.row(i), X.d * sizeof(float));
  std::vector<size_t> order(X.n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
    int cmp = std::memcmp(X.row(a), X.row(b), X.d * sizeof(float));
    if (cmp != 0) return cmp < 0;
    return y[a] < y[b];
  });
  return order;
}

}  // namespace

GridReport grid_search(const embedstore::EmbeddingMatrix& X, const std::vector<int>& y,
                       const std::vector<KernelSpec>& kernels, const std::vector<double>& Cs,
                       int k, uint64_t seed, const CellHook& hook) {
  if (X.n != y.size()) raise(Errc::InvalidArgument, "labels/rows mismatch");
  if (k < 2) raise(Errc::InvalidArgument, "grid search needs k >= 2");
  if (kernels.empty() || Cs.empty()) raise(Errc::InvalidArgument, "empty kernel or C grid");
  for (const auto& spec : kernels) validate(spec);
  for (double c : Cs)
    if (c <= 0.0) raise(Errc::InvalidConfig, "C must be positive");

  const auto order = canonical_order(X, y);
  const size_t n = X.n;
  std::vector<float> Xc(n * X.d);
  std::vector<int> yc(n);
  for (size_t i = 0; i < n; ++i) {
    std::memcpy(Xc.data() + i * X.d, X.row(order[i]), X.d * sizeof(float));
    yc[i] = y[order[i]];
  }

  const auto folds = stratified_kfold(yc, k, seed);
  const auto dots = dot_gram(Xc.data(), n, X.d);

  GridReport report;
  report.training_count = static_cast<int>(kernels.size() * Cs.size() * static_cast<size_t>(k));
  report.cells.resize(static_cast<size_t>(report.training_count));

  for (size_t kern = 0; kern < kernels.size(); ++kern) {
    const auto gram = kernel_gram_from_dots(dots, n, X.d, kernels[kern]);
    const size_t cells_per_kernel = Cs.size() * static_cast<size_t>(k);
    parallel_for(cells_per_kernel, [&](size_t local) {
      const size_t c_idx = local / static_cast<size_t>(k);
      const int fold = static_cast<int>(local % static_cast<size_t>(k));
      const size_t cell_index = kern * cells_per_kernel + local;

      GridCell cell;
      cell.kernel = kernels[kern].name();
      cell.C = Cs[c_idx];
      cell.fold = fold;
      try {
        GramProblem problem;
        problem.gram = &gram;
        problem.stride = n;
        const auto& test_idx = folds[static_cast<size_t>(fold)];
        std::vector<char> in_test(n, 0);
        for (size_t t : test_idx) in_test[t] = 1;
        for (size_t i = 0; i < n; ++i) {
          if (!in_test[i]) {
            problem.idx.push_back(i);
            problem.y.push_back(yc[i]);
          }
        }
        bool has_pos = std::find(problem.y.begin(), problem.y.end(), 1) != problem.y.end();
        bool has_neg = std::find(problem.y.begin(), problem.y.end(), -1) != problem.y.end();
        if (!has_pos || !has_neg) raise(Errc::SingleClass, "training fold has a single class");

        SVMConfig cfg;
        cfg.C = Cs[c_idx];
        cfg.kernel = kernels[kern];
        cfg.seed = mix_seed(seed, kern * 10000 + c_idx * 100 + static_cast<size_t>(fold));
        SmoResult res = smo_solve(problem, cfg);
        if (hook) hook(CellInfo{kern, Cs[c_idx], fold, problem, res, cfg});

        size_t correct = 0;
        for (size_t t : test_idx) {
          double value = res.bias;
          for (size_t j = 0; j < problem.size(); ++j) {
            if (res.alpha[j] != 0.0)
              value += res.alpha[j] * problem.y[j] * gram[problem.idx[j] * n + t];
          }
          int pred = value >= 0.0 ? 1 : -1;
          if (pred == yc[t]) ++correct;
        }
        cell.accuracy = test_idx.empty()
                            ? 0.0
                            : static_cast<double>(correct) / static_cast<double>(test_idx.size());
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      report.cells[cell_index] = std::move(cell);
    });
  }

  // Aggregates over non-failed cells only.
  double sum = 0.0;
  size_t good = 0;
  for (const auto& cell : report.cells) {
    if (cell.failed) {
      ++report.failed_count;
    } else {
      sum += cell.accuracy;
      ++good;
    }
  }
  report.overall_mean = good > 0 ? sum / static_cast<double>(good) : 0.0;
  double var = 0.0;
  for (const auto& cell : report.cells)
    if (!cell.failed) var += (cell.accuracy - report.overall_mean) *
                             (cell.accuracy - report.overall_mean);
  report.overall_std = good > 1 ? std::sqrt(var / static_cast<double>(good - 1)) : 0.0;

  for (size_t kern = 0; kern < kernels.size(); ++kern) {
    for (size_t c_idx = 0; c_idx < Cs.size(); ++c_idx) {
      double acc = 0.0;
      size_t cnt = 0;
      for (int fold = 0; fold < k; ++fold) {
        const auto& cell =
            report.cells[kern * Cs.size() * static_cast<size_t>(k) +
                         c_idx * static_cast<size_t>(k) + static_cast<size_t>(fold)];
        if (!cell.failed) {
          acc += cell.accuracy;
          ++cnt;
        }
      }
      report.per_config_mean.push_back(
          {kernels[kern].name(), Cs[c_idx], cnt > 0 ? acc / static_cast<double>(cnt) : 0.0});
    }
  }
  return report;
}

std::string grid_report_to_json(const GridReport& report) {
  ordered_json j;
  j["training_count"] = report.training_count;
  j["failed_count"] = report.failed_count;
  j["overall_mean"] = report.overall_mean;
  j["overall_std"] = report.overall_std;
  j["per_config_mean"] = ordered_json::array();
  for (const auto& pc : report.per_config_mean)
    j["per_config_mean"].push_back(
        ordered_json{{"kernel", pc.kernel}, {"C", pc.C}, {"mean_accuracy", pc.mean_accuracy}});
  j["cells"] = ordered_json::array();
  for (const auto& cell : report.cells) {
    if (cell.failed) continue;
    j["cells"].push_back(ordered_json{
        {"kernel", cell.kernel}, {"C", cell.C}, {"fold", cell.fold}, {"accuracy", cell.accuracy}});
  }
  j["failed_cells"] = ordered_json::array();
  for (const auto& cell : report.cells) {
    if (!cell.failed) continue;
    j["failed_cells"].push_back(ordered_json{
        {"kernel", cell.kernel}, {"C", cell.C}, {"fold", cell.fold}, {"error", cell.error}});
  }
  return j.dump(2) + "\n";
}

}  // namespace discourse::svmvalidate
