#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "discourse/clustering.hpp"
#include "discourse/corpus.hpp"
#include "discourse/endpoints.hpp"
#include "discourse/projection.hpp"
#include "discourse/svmvalidate.hpp"

namespace discourse::pipeline {

enum class Backend { stub, live };
const char* backend_name(Backend b) noexcept;
Backend backend_from_name(const std::string& name);

struct SvmGridConfig {
  std::vector<svmvalidate::KernelSpec> kernels;  // default: linear, polynomial, rbf
  std::vector<double> cs{0.1, 0.5, 1.0, 1.5, 2.0};
  int folds = 5;
  std::optional<uint64_t> seed;  // default derives from the global seed
};

struct ProjectionConfig {
  projection::Method method = projection::Method::pca;
  int umap_n_neighbors = 15;
  double umap_min_dist = 0.1;
  std::optional<uint64_t> seed;
};

struct PipelineConfig {
  uint64_t seed = 42;
  Backend backend = Backend::stub;
  std::filesystem::path output_dir = "out";
  std::filesystem::path names_csv;

  endpoints::EndpointConfig endpoint;
  endpoints::GenerationParams generation;  // model_id defaults to llama-3.2-3b-instruct
  endpoints::EmbedderConfig embedder;      // model_id defaults to bge-m3

  corpus::GenerationPlan plan;
  bool plan_seed_explicit = false;  // config set plan.base_seed itself

  bool normalize_embeddings = true;
  SvmGridConfig svm;
  clustering::SearchSpace cluster_search;
  bool cluster_seed_explicit = false;
  int representatives_m = 3;
  ProjectionConfig projection;

  std::filesystem::path stopwords_path;
  std::filesystem::path adjectives_path;
  int max_cloud_terms = 60;
  int contrast_top_n = 25;

  int64_t plan_seed() const;
  uint64_t svm_seed() const;
  uint64_t cluster_seed() const;
  uint64_t projection_seed() const;
};

// Parses and validates the JSON config. Unknown keys are rejected. Relative
// paths resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

struct CliOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::string> backend;
  std::optional<uint64_t> seed;
  std::optional<std::string> names_csv;
};
void apply_overrides(PipelineConfig& cfg, const CliOverrides& overrides);

}  // namespace discourse::pipeline
