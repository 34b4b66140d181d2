#include "discourse/pipeline_config.hpp"

#include <fstream>

#include <json.hpp>

#include "discourse/errors.hpp"
#include "discourse/rng.hpp"

namespace discourse::pipeline {

using nlohmann::ordered_json;

const char* backend_name(Backend b) noexcept { return b == Backend::stub ? "stub" : "live"; }

Backend backend_from_name(const std::string& name) {
  if (name == "stub") return Backend::stub;
  if (name == "live") return Backend::live;
  raise(Errc::InvalidConfig, "backend must be `stub` or `live`, got `" + name + "`");
}

int64_t PipelineConfig::plan_seed() const {
  return plan_seed_explicit ? plan.base_seed : static_cast<int64_t>(seed);
}
uint64_t PipelineConfig::svm_seed() const {
  return svm.seed ? *svm.seed : mix_seed(seed, 0x5176);
}
uint64_t PipelineConfig::cluster_seed() const {
  return cluster_seed_explicit ? cluster_search.seed : mix_seed(seed, 0xC1C5);
}
uint64_t PipelineConfig::projection_seed() const {
  return projection.seed ? *projection.seed : mix_seed(seed, 0x9801);
}

namespace {

void check_keys(const ordered_json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* name : allowed)
      if (key == name) {
        ok = true;
        break;
      }
    if (!ok) raise(Errc::InvalidConfig, "unknown key `" + key + "` in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute()) return path;
  return base / path;
}

svmvalidate::KernelSpec parse_kernel(const ordered_json& j, const std::string& where) {
  svmvalidate::KernelSpec spec;
  if (j.is_string()) {
    spec.kind = svmvalidate::kernel_kind_from_name(j.get<std::string>());
    return spec;
  }
  if (!j.is_object()) raise(Errc::InvalidConfig, where + " must be a string or object");
  check_keys(j, where, {"kind", "degree", "gamma", "coef0"});
  if (!j.contains("kind")) raise(Errc::InvalidConfig, where + " needs a `kind`");
  spec.kind = svmvalidate::kernel_kind_from_name(j["kind"].get<std::string>());
  if (j.contains("degree")) spec.degree = j["degree"].get<int>();
  if (j.contains("gamma") && !j["gamma"].is_null()) spec.gamma = j["gamma"].get<double>();
  if (j.contains("coef0")) spec.coef0 = j["coef0"].get<double>();
  svmvalidate::validate(spec);
  return spec;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::InvalidConfig, "cannot open config file: " + path.string());
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    raise(Errc::InvalidConfig, "config is not a JSON object: " + path.string());

  const std::filesystem::path base = path.parent_path();
  PipelineConfig cfg;
  cfg.generation.model_id = "llama-3.2-3b-instruct";
  cfg.embedder.model_id = "bge-m3";
  for (auto kind : {svmvalidate::KernelKind::linear, svmvalidate::KernelKind::polynomial,
                    svmvalidate::KernelKind::rbf}) {
    svmvalidate::KernelSpec spec;
    spec.kind = kind;
    cfg.svm.kernels.push_back(spec);
  }

  check_keys(j, "config",
             {"seed", "backend", "output_dir", "names_csv", "endpoint", "generation", "embedder",
              "plan", "normalize_embeddings", "svm_grid", "cluster_search", "representatives",
              "projection", "lexicons", "report"});

  try {
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("backend")) cfg.backend = backend_from_name(j["backend"].get<std::string>());
    if (j.contains("output_dir"))
      cfg.output_dir = resolve(base, j["output_dir"].get<std::string>());
    if (j.contains("names_csv")) cfg.names_csv = resolve(base, j["names_csv"].get<std::string>());

    if (j.contains("endpoint")) {
      const auto& e = j["endpoint"];
      check_keys(e, "endpoint",
                 {"base_url", "api_key", "timeout_ms", "max_retries", "max_concurrency"});
      if (e.contains("base_url")) cfg.endpoint.base_url = e["base_url"].get<std::string>();
      if (e.contains("api_key")) cfg.endpoint.api_key = e["api_key"].get<std::string>();
      if (e.contains("timeout_ms"))
        cfg.endpoint.timeout = std::chrono::milliseconds(e["timeout_ms"].get<int64_t>());
      if (e.contains("max_retries")) cfg.endpoint.max_retries = e["max_retries"].get<int>();
      if (e.contains("max_concurrency"))
        cfg.endpoint.max_concurrency = e["max_concurrency"].get<int>();
      endpoints::validate(cfg.endpoint);
    }

    if (j.contains("generation")) {
      const auto& g = j["generation"];
      check_keys(g, "generation", {"model_id", "temperature", "top_p", "max_new_tokens"});
      if (g.contains("model_id")) cfg.generation.model_id = g["model_id"].get<std::string>();
      if (g.contains("temperature")) cfg.generation.temperature = g["temperature"].get<double>();
      if (g.contains("top_p")) cfg.generation.top_p = g["top_p"].get<double>();
      if (g.contains("max_new_tokens"))
        cfg.generation.max_new_tokens = g["max_new_tokens"].get<int>();
      endpoints::validate(cfg.generation);
    }

    if (j.contains("embedder")) {
      const auto& e = j["embedder"];
      check_keys(e, "embedder", {"model_id", "dimension", "max_input_tokens", "batch_size"});
      if (e.contains("model_id")) cfg.embedder.model_id = e["model_id"].get<std::string>();
      if (e.contains("dimension")) cfg.embedder.dimension = e["dimension"].get<int>();
      if (e.contains("max_input_tokens"))
        cfg.embedder.max_input_tokens = e["max_input_tokens"].get<int>();
      if (e.contains("batch_size")) cfg.embedder.batch_size = e["batch_size"].get<int>();
      endpoints::validate(cfg.embedder);
    }

    if (j.contains("plan")) {
      const auto& p = j["plan"];
      check_keys(p, "plan", {"skin_tones", "reps_per_name", "nameless_per_tone", "base_seed"});
      if (p.contains("skin_tones"))
        cfg.plan.skin_tones = p["skin_tones"].get<std::vector<std::string>>();
      if (p.contains("reps_per_name")) cfg.plan.reps_per_name = p["reps_per_name"].get<int>();
      if (p.contains("nameless_per_tone"))
        cfg.plan.nameless_per_tone = p["nameless_per_tone"].get<int>();
      if (p.contains("base_seed")) {
        cfg.plan.base_seed = p["base_seed"].get<int64_t>();
        cfg.plan_seed_explicit = true;
      }
    }

    if (j.contains("normalize_embeddings"))
      cfg.normalize_embeddings = j["normalize_embeddings"].get<bool>();

    if (j.contains("svm_grid")) {
      const auto& s = j["svm_grid"];
      check_keys(s, "svm_grid", {"kernels", "cs", "folds", "seed"});
      if (s.contains("kernels")) {
        cfg.svm.kernels.clear();
        for (const auto& k : s["kernels"]) cfg.svm.kernels.push_back(parse_kernel(k, "kernel"));
        if (cfg.svm.kernels.empty()) raise(Errc::InvalidConfig, "svm_grid.kernels is empty");
      }
      if (s.contains("cs")) {
        cfg.svm.cs = s["cs"].get<std::vector<double>>();
        if (cfg.svm.cs.empty()) raise(Errc::InvalidConfig, "svm_grid.cs is empty");
        for (double c : cfg.svm.cs)
          if (c <= 0.0) raise(Errc::InvalidConfig, "svm_grid.cs entries must be positive");
      }
      if (s.contains("folds")) cfg.svm.folds = s["folds"].get<int>();
      if (cfg.svm.folds < 2) raise(Errc::InvalidConfig, "svm_grid.folds must be >= 2");
      if (s.contains("seed")) cfg.svm.seed = s["seed"].get<uint64_t>();
    }

    if (j.contains("cluster_search")) {
      const auto& c = j["cluster_search"];
      check_keys(c, "cluster_search",
                 {"dbscan_min_pts", "dbscan_eps_quantiles", "kmeans_ks", "kmeans_max_iter",
                  "seed"});
      if (c.contains("dbscan_min_pts"))
        cfg.cluster_search.dbscan_min_pts = c["dbscan_min_pts"].get<std::vector<int>>();
      if (c.contains("dbscan_eps_quantiles"))
        cfg.cluster_search.dbscan_eps_quantiles =
            c["dbscan_eps_quantiles"].get<std::vector<double>>();
      if (c.contains("kmeans_ks"))
        cfg.cluster_search.kmeans_ks = c["kmeans_ks"].get<std::vector<int>>();
      if (c.contains("kmeans_max_iter"))
        cfg.cluster_search.kmeans_max_iter = c["kmeans_max_iter"].get<int>();
      if (c.contains("seed")) {
        cfg.cluster_search.seed = c["seed"].get<uint64_t>();
        cfg.cluster_seed_explicit = true;
      }
      clustering::validate(cfg.cluster_search);
    }

    if (j.contains("representatives")) {
      const auto& r = j["representatives"];
      check_keys(r, "representatives", {"m"});
      if (r.contains("m")) cfg.representatives_m = r["m"].get<int>();
      if (cfg.representatives_m < 1) raise(Errc::InvalidConfig, "representatives.m must be >= 1");
    }

    if (j.contains("projection")) {
      const auto& p = j["projection"];
      check_keys(p, "projection", {"method", "umap_n_neighbors", "umap_min_dist", "seed"});
      if (p.contains("method")) {
        const std::string m = p["method"].get<std::string>();
        if (m == "pca") cfg.projection.method = projection::Method::pca;
        else if (m == "umap") cfg.projection.method = projection::Method::umap;
        else raise(Errc::InvalidConfig, "projection.method must be `pca` or `umap`");
      }
      if (p.contains("umap_n_neighbors"))
        cfg.projection.umap_n_neighbors = p["umap_n_neighbors"].get<int>();
      if (p.contains("umap_min_dist"))
        cfg.projection.umap_min_dist = p["umap_min_dist"].get<double>();
      if (p.contains("seed")) cfg.projection.seed = p["seed"].get<uint64_t>();
    }

    if (j.contains("lexicons")) {
      const auto& l = j["lexicons"];
      check_keys(l, "lexicons", {"stopwords", "adjectives"});
      if (l.contains("stopwords"))
        cfg.stopwords_path = resolve(base, l["stopwords"].get<std::string>());
      if (l.contains("adjectives"))
        cfg.adjectives_path = resolve(base, l["adjectives"].get<std::string>());
    }

    if (j.contains("report")) {
      const auto& r = j["report"];
      check_keys(r, "report", {"max_cloud_terms", "contrast_top_n"});
      if (r.contains("max_cloud_terms")) cfg.max_cloud_terms = r["max_cloud_terms"].get<int>();
      if (r.contains("contrast_top_n")) cfg.contrast_top_n = r["contrast_top_n"].get<int>();
    }
  } catch (const ordered_json::exception& e) {
    raise(Errc::InvalidConfig, std::string("config type error: ") + e.what());
  }

  cfg.plan.params = cfg.generation;
  corpus::validate(cfg.plan);
  return cfg;
}

void apply_overrides(PipelineConfig& cfg, const CliOverrides& overrides) {
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  if (overrides.backend) cfg.backend = backend_from_name(*overrides.backend);
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    // The CLI seed overrides the global key; derived stage seeds follow.
    cfg.plan_seed_explicit = false;
    cfg.svm.seed.reset();
    cfg.cluster_seed_explicit = false;
    cfg.projection.seed.reset();
  }
  if (overrides.names_csv) cfg.names_csv = *overrides.names_csv;
}

}  // namespace discourse::pipeline
