#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discourse/embedstore.hpp"

namespace discourse::svmvalidate {

enum class KernelKind { linear, polynomial, rbf };
const char* kernel_kind_name(KernelKind kind) noexcept;
KernelKind kernel_kind_from_name(const std::string& name);

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  int degree = 3;                 // polynomial only
  std::optional<double> gamma;    // polynomial/rbf; empty = 1/d
  double coef0 = 0.0;             // polynomial only

  double resolve_gamma(size_t d) const { return gamma ? *gamma : 1.0 / static_cast<double>(d); }
  std::string name() const { return kernel_kind_name(kind); }
};
void validate(const KernelSpec& spec);

// linear = <x,y>; polynomial = (g<x,y>+coef0)^degree; rbf = exp(-g*||x-y||^2).
double kernel_eval(const KernelSpec& spec, std::span<const float> x, std::span<const float> y);

struct SVMConfig {
  double C = 1.0;
  KernelSpec kernel;
  double tol = 1e-3;
  int max_passes = 10;       // consecutive quiescent sweeps before stopping
  long long max_iter = 0;    // cap on successful pair updates; 0 = 10*n
  uint64_t seed = 0x5d0e5;   // drives the random second-index choice
};
void validate(const SVMConfig& cfg);

struct SVMModel {
  std::vector<float> support_vectors;  // n_sv × d, row-major
  size_t n_sv = 0;
  size_t d = 0;
  std::vector<double> dual_coefs;  // alpha_i * y_i
  double bias = 0.0;
  SVMConfig config;
  bool converged = true;  // false when the update budget ran out (DidNotConverge)
};

// Dual SMO view of a training subset: `idx` selects rows of a precomputed
// full Gram matrix, `y` holds the matching ±1 labels.
struct GramProblem {
  const std::vector<double>* gram = nullptr;
  size_t stride = 0;
  std::vector<size_t> idx;
  std::vector<int> y;

  size_t size() const { return idx.size(); }
  double k(size_t a, size_t b) const { return (*gram)[idx[a] * stride + idx[b]]; }
};

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  bool converged = true;
  long long sweeps = 0;
  long long updates = 0;
};

// Simplified SMO: sweep all points, pick a violator, pair it with a random
// second index (falling back to a scan from that index until a pair makes
// progress). Stops after max_passes sweeps without change or when the update
// budget is exhausted.
SmoResult smo_solve(const GramProblem& problem, const SVMConfig& cfg);

// Largest violation of the tolerance-form KKT conditions (<= tol at optimum).
double kkt_max_violation(const GramProblem& problem, const SmoResult& result, double C);
double sum_alpha_y(const GramProblem& problem, const std::vector<double>& alpha);

SVMModel train_svm(const float* X, size_t n, size_t d, const std::vector<int>& y,
                   const SVMConfig& cfg);

double decision_value(const SVMModel& model, std::span<const float> x);
int predict(const SVMModel& model, std::span<const float> x);  // sign(0) = +1

// Partition of 0..n-1 into k folds; per-class counts differ by at most one
// across folds. Deterministic for a fixed seed.
std::vector<std::vector<size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                  uint64_t seed);

struct GridCell {
  std::string kernel;
  double C = 0.0;
  int fold = 0;
  double accuracy = 0.0;
  bool failed = false;
  std::string error;
};

struct ConfigMean {
  std::string kernel;
  double C = 0.0;
  double mean_accuracy = 0.0;
};

struct GridReport {
  std::vector<GridCell> cells;  // kernel-major, then C, then fold
  std::vector<ConfigMean> per_config_mean;
  double overall_mean = 0.0;
  double overall_std = 0.0;  // sample std over non-failed cells
  int training_count = 0;
  int failed_count = 0;
};

std::string grid_report_to_json(const GridReport& report);

// Invoked once per completed cell (possibly from worker threads).
struct CellInfo {
  size_t kernel_index;
  double C;
  int fold;
  const GramProblem& problem;
  const SmoResult& result;
  const SVMConfig& config;
};
using CellHook = std::function<void(const CellInfo&)>;

// Trains one SVM per (kernel, C, fold). Rows are canonicalized internally by
// content hash, so the report does not depend on story order. Failed cells
// are excluded from aggregates and reported.
GridReport grid_search(const embedstore::EmbeddingMatrix& X, const std::vector<int>& y,
                       const std::vector<KernelSpec>& kernels, const std::vector<double>& Cs,
                       int k, uint64_t seed, const CellHook& hook = nullptr);

}  // namespace discourse::svmvalidate
