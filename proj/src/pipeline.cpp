#include "discourse/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "discourse/clustering.hpp"
#include "discourse/embedstore.hpp"
#include "discourse/errors.hpp"
#include "discourse/lexical.hpp"
#include "discourse/projection.hpp"
#include "discourse/report.hpp"
#include "discourse/representatives.hpp"
#include "discourse/svmvalidate.hpp"

namespace discourse::pipeline {

using nlohmann::ordered_json;

StagePaths StagePaths::in(const std::filesystem::path& output_dir) {
  StagePaths p;
  p.corpus = output_dir / "corpus.jsonl";
  p.failures = output_dir / "failures.jsonl";
  p.embeddings = output_dir / "embeddings.emb";
  p.grid_report = output_dir / "grid_report.json";
  p.clusters = output_dir / "clusters.json";
  p.representatives_json = output_dir / "representatives.json";
  p.representatives_dir = output_dir / "representatives";
  p.profiles = output_dir / "profiles.json";
  p.projection = output_dir / "projection.json";
  p.report_json = output_dir / "report.json";
  p.report_md = output_dir / "report.md";
  p.figures_dir = output_dir / "figures";
  return p;
}

namespace {

constexpr const char* kStubTimestamp = "1970-01-01T00:00:00Z";

void require_artifact(const std::filesystem::path& path, const char* producer) {
  if (!std::filesystem::exists(path))
    raise(Errc::MissingArtifact,
          path.filename().string() + " not found in " + path.parent_path().string() +
              "; produce it with the `" + producer + "` stage");
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::WriteError, "cannot open " + path.string());
  out << content;
  if (!out) raise(Errc::WriteError, "write failed: " + path.string());
}

ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open " + path.string());
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) raise(Errc::ParseError, "malformed JSON: " + path.string());
  return j;
}

// Labels aligned to the embedding matrix row order, from clusters.json.
std::vector<int> labels_for_matrix(const ordered_json& clusters_json,
                                   const embedstore::EmbeddingMatrix& X) {
  if (!clusters_json.contains("labels") || !clusters_json["labels"].is_object())
    raise(Errc::ParseError, "clusters.json has no labels object");
  const auto& by_id = clusters_json["labels"];
  std::vector<int> labels(X.n);
  for (size_t i = 0; i < X.n; ++i) {
    auto it = by_id.find(X.ids[i]);
    if (it == by_id.end())
      raise(Errc::IdMismatch, "story " + X.ids[i] + " missing from clusters.json labels");
    labels[i] = it->get<int>();
  }
  return labels;
}

std::map<std::string, std::string> tone_by_id(const std::vector<corpus::StoryRecord>& records) {
  std::map<std::string, std::string> tones;
  for (const auto& rec : records) tones[rec.id] = rec.skin_tone;
  return tones;
}

// Distinct tones in corpus file order (the contrast direction follows it).
std::vector<std::string> tones_in_order(const std::vector<corpus::StoryRecord>& records) {
  std::vector<std::string> tones;
  for (const auto& rec : records)
    if (std::find(tones.begin(), tones.end(), rec.skin_tone) == tones.end())
      tones.push_back(rec.skin_tone);
  return tones;
}

ordered_json summary_to_json(const corpus::CorpusSummary& summary) {
  ordered_json j;
  j["planned"] = summary.planned;
  j["written"] = summary.written;
  j["skipped"] = summary.skipped;
  j["failed"] = summary.failed;
  size_t total = 0;
  j["counts"] = ordered_json::array();
  for (const auto& [key, count] : summary.counts) {
    j["counts"].push_back(ordered_json{
        {"template", key.first}, {"skin_tone", key.second}, {"count", count}});
    total += count;
  }
  j["total"] = total;
  return j;
}

lexical::LexicalProfile profile_from_json(const ordered_json& j) {
  lexical::LexicalProfile profile;
  profile.group_key = j.value("group_key", std::string{});
  profile.kind = j.value("kind", std::string{}) == "adjectives" ? lexical::ProfileKind::adjectives
                                                                : lexical::ProfileKind::words;
  profile.total_tokens = j.value("total_tokens", 0LL);
  for (const auto& term : j.value("terms", ordered_json::array()))
    profile.counts.emplace_back(term.value("term", std::string{}), term.value("count", 0LL));
  return profile;
}

}  // namespace

corpus::CorpusSummary stage_generate(const PipelineConfig& cfg) {
  if (cfg.names_csv.empty())
    raise(Errc::InvalidConfig, "names_csv must be set for the generate stage");
  const auto paths = StagePaths::in(cfg.output_dir);

  corpus::NameTable names = corpus::load_names(cfg.names_csv);
  corpus::GenerationPlan plan = cfg.plan;
  plan.params = cfg.generation;
  plan.base_seed = cfg.plan_seed();
  auto jobs = corpus::expand_prompts(plan, names);

  std::unique_ptr<endpoints::TextGenerator> backend;
  if (cfg.backend == Backend::stub) {
    backend = endpoints::make_stub_generator();
  } else {
    backend = endpoints::make_http_generator(cfg.generation, cfg.endpoint);
  }

  corpus::RunOptions opts;
  opts.max_concurrency = cfg.endpoint.max_concurrency;
  if (cfg.backend == Backend::stub) opts.created_at_override = kStubTimestamp;

  auto summary = corpus::run_generation(jobs, *backend, cfg.generation, paths.corpus, opts);
  std::cerr << "[generate] planned " << summary.planned << ", written " << summary.written
            << ", skipped " << summary.skipped << ", failed " << summary.failed << "\n";
  return summary;
}

void stage_embed(const PipelineConfig& cfg) {
  const auto paths = StagePaths::in(cfg.output_dir);
  require_artifact(paths.corpus, "generate");

  std::unique_ptr<endpoints::TextEmbedder> embedder;
  if (cfg.backend == Backend::stub) {
    embedder = endpoints::make_stub_embedder(cfg.embedder);
  } else {
    embedder = endpoints::make_http_embedder(cfg.embedder, cfg.endpoint);
  }
  auto matrix = embedstore::encode_corpus(paths.corpus, *embedder, cfg.normalize_embeddings);
  embedstore::save_matrix(matrix, paths.embeddings);
  std::cerr << "[embed] " << matrix.n << "x" << matrix.d << " matrix written to "
            << paths.embeddings << "\n";
}

void stage_validate(const PipelineConfig& cfg) {
  const auto paths = StagePaths::in(cfg.output_dir);
  require_artifact(paths.embeddings, "embed");
  require_artifact(paths.corpus, "generate");

  auto X = embedstore::load_matrix(paths.embeddings);
  auto records = corpus::load_corpus(paths.corpus);
  auto tones = tone_by_id(records);

  std::set<std::string> distinct;
  for (const auto& [id, tone] : tones) distinct.insert(tone);
  if (distinct.size() != 2)
    raise(Errc::InvalidConfig, "svm validation expects exactly 2 skin tones, corpus has " +
                                   std::to_string(distinct.size()));
  // Alphabetically first tone maps to -1, second to +1.
  const std::string negative = *distinct.begin();
  std::vector<int> y(X.n);
  for (size_t i = 0; i < X.n; ++i) {
    auto it = tones.find(X.ids[i]);
    if (it == tones.end())
      raise(Errc::IdMismatch, "story " + X.ids[i] + " missing from corpus metadata");
    y[i] = it->second == negative ? -1 : 1;
  }

  auto report = svmvalidate::grid_search(X, y, cfg.svm.kernels, cfg.svm.cs, cfg.svm.folds,
                                         cfg.svm_seed());
  write_text(paths.grid_report, svmvalidate::grid_report_to_json(report));
  std::cerr << "[validate] " << report.training_count << " trainings, overall accuracy "
            << report.overall_mean * 100.0 << "% ± " << report.overall_std * 100.0 << "%\n";
}

void stage_cluster(const PipelineConfig& cfg) {
  const auto paths = StagePaths::in(cfg.output_dir);
  require_artifact(paths.embeddings, "embed");

  auto X = embedstore::load_matrix(paths.embeddings);
  clustering::SearchSpace space = cfg.cluster_search;
  space.seed = cfg.cluster_seed();
  auto outcome = clustering::search_clustering(X, space);

  ordered_json j;
  j["algorithm"] = outcome.best.algorithm;
  j["params"] = outcome.best.params;
  j["vrc"] = outcome.best.vrc ? *outcome.best.vrc : 0.0;
  j["n_clusters"] = outcome.best.n_clusters;
  j["noise_count"] = outcome.best.noise_count;
  j["cluster_sizes"] = ordered_json::object();
  for (const auto& [cluster, size] : outcome.best.cluster_sizes)
    j["cluster_sizes"][std::to_string(cluster)] = size;
  j["labels"] = ordered_json::object();
  for (size_t i = 0; i < X.n; ++i) j["labels"][X.ids[i]] = outcome.best.labels[i];
  j["trials"] = ordered_json::array();
  for (const auto& trial : outcome.trials) {
    ordered_json t;
    t["algorithm"] = trial.algorithm;
    t["params"] = trial.params;
    if (trial.vrc) t["vrc"] = *trial.vrc;
    else t["vrc"] = nullptr;
    t["n_clusters"] = trial.n_clusters;
    t["noise_count"] = trial.noise_count;
    t["retained_fraction"] = trial.retained_fraction;
    if (!trial.note.empty()) t["note"] = trial.note;
    j["trials"].push_back(std::move(t));
  }
  write_text(paths.clusters, j.dump(2) + "\n");
  std::cerr << "[cluster] best " << outcome.best.algorithm << " vrc "
            << (outcome.best.vrc ? *outcome.best.vrc : 0.0) << " with "
            << outcome.best.n_clusters << " clusters, " << outcome.best.noise_count << " noise\n";
}

void stage_select(const PipelineConfig& cfg) {
  const auto paths = StagePaths::in(cfg.output_dir);
  require_artifact(paths.embeddings, "embed");
  require_artifact(paths.clusters, "cluster");
  require_artifact(paths.corpus, "generate");

  auto X = embedstore::load_matrix(paths.embeddings);
  auto labels = labels_for_matrix(read_json_file(paths.clusters), X);
  auto reps = representatives::select_representatives(X, labels, cfg.representatives_m);

  ordered_json j;
  j["m"] = reps.m;
  j["clusters"] = ordered_json::array();
  for (const auto& [cluster, cluster_reps] : reps.per_cluster) {
    ordered_json entry;
    entry["cluster"] = cluster;
    for (const char* kind : {"central", "peripheral"}) {
      const auto& list =
          kind == std::string("central") ? cluster_reps.central : cluster_reps.peripheral;
      entry[kind] = ordered_json::array();
      for (const auto& rep : list)
        entry[kind].push_back(
            ordered_json{{"story_id", rep.story_id}, {"mean_dist", rep.mean_dist}});
    }
    j["clusters"].push_back(std::move(entry));
  }
  write_text(paths.representatives_json, j.dump(2) + "\n");

  // One plain-text story per selection for the human analyst.
  auto records = corpus::load_corpus(paths.corpus);
  std::map<std::string, const corpus::StoryRecord*> by_id;
  for (const auto& rec : records) by_id[rec.id] = &rec;
  std::filesystem::create_directories(paths.representatives_dir);
  for (const auto& entry : std::filesystem::directory_iterator(paths.representatives_dir))
    std::filesystem::remove(entry.path());
  for (const auto& [cluster, cluster_reps] : reps.per_cluster) {
    for (const char* kind : {"central", "peripheral"}) {
      const auto& list =
          kind == std::string("central") ? cluster_reps.central : cluster_reps.peripheral;
      for (size_t rank = 0; rank < list.size(); ++rank) {
        auto it = by_id.find(list[rank].story_id);
        if (it == by_id.end())
          raise(Errc::IdMismatch, "story " + list[rank].story_id + " not found in corpus");
        const std::string filename = std::to_string(cluster) + "_" + std::to_string(rank) + "_" +
                                     kind + "_" + list[rank].story_id + ".txt";
        write_text(paths.representatives_dir / filename, it->second->text + "\n");
      }
    }
  }
  std::cerr << "[select] " << reps.total_selected() << " stories selected into "
            << paths.representatives_dir << "\n";
}

void stage_analyze(const PipelineConfig& cfg) {
  const auto paths = StagePaths::in(cfg.output_dir);
  require_artifact(paths.corpus, "generate");
  require_artifact(paths.clusters, "cluster");
  if (cfg.stopwords_path.empty() || cfg.adjectives_path.empty())
    raise(Errc::MissingLexicon, "config must set lexicons.stopwords and lexicons.adjectives");

  auto records = corpus::load_corpus(paths.corpus);
  auto lex = lexical::load_lexicons(cfg.stopwords_path, cfg.adjectives_path);

  const auto tones = tones_in_order(records);
  std::map<std::string, std::vector<std::string>> texts_by_tone;
  for (const auto& rec : records) texts_by_tone[rec.skin_tone].push_back(rec.text);

  std::vector<lexical::LexicalProfile> profiles;
  for (const auto& tone : tones) {
    profiles.push_back(lexical::frequency_profile(texts_by_tone[tone], lex,
                                                  lexical::ProfileKind::words, tone));
    profiles.push_back(lexical::frequency_profile(texts_by_tone[tone], lex,
                                                  lexical::ProfileKind::adjectives, tone));
  }

  // Per-cluster word profiles give the report its cluster vocabularies.
  auto clusters_json = read_json_file(paths.clusters);
  std::map<std::string, int> label_of;
  for (const auto& [id, label] : clusters_json["labels"].items())
    label_of[id] = label.get<int>();
  std::map<int, std::vector<std::string>> texts_by_cluster;
  for (const auto& rec : records) {
    auto it = label_of.find(rec.id);
    if (it == label_of.end())
      raise(Errc::IdMismatch, "story " + rec.id + " missing from clusters.json labels");
    if (it->second >= 0) texts_by_cluster[it->second].push_back(rec.text);
  }
  for (const auto& [cluster, texts] : texts_by_cluster)
    profiles.push_back(lexical::frequency_profile(texts, lex, lexical::ProfileKind::words,
                                                  "cluster_" + std::to_string(cluster)));

  ordered_json j;
  j["profiles"] = ordered_json::array();
  for (const auto& profile : profiles) {
    ordered_json p;
    p["group_key"] = profile.group_key;
    p["kind"] = lexical::profile_kind_name(profile.kind);
    p["total_tokens"] = profile.total_tokens;
    p["terms"] = ordered_json::array();
    for (const auto& [term, count] : profile.counts)
      p["terms"].push_back(ordered_json{{"term", term}, {"count", count}});
    j["profiles"].push_back(std::move(p));
  }

  j["contrasts"] = ordered_json::array();
  if (tones.size() == 2) {
    for (auto kind : {lexical::ProfileKind::words, lexical::ProfileKind::adjectives}) {
      const size_t offset = kind == lexical::ProfileKind::words ? 0 : 1;
      const auto& a = profiles[0 * 2 + offset];
      const auto& b = profiles[1 * 2 + offset];
      auto contrast = lexical::contrast_terms(a, b, static_cast<size_t>(cfg.contrast_top_n));
      ordered_json c;
      c["a"] = a.group_key;
      c["b"] = b.group_key;
      c["kind"] = lexical::profile_kind_name(kind);
      c["terms"] = ordered_json::array();
      for (const auto& [term, score] : contrast)
        c["terms"].push_back(ordered_json{{"term", term}, {"score", score}});
      j["contrasts"].push_back(std::move(c));
    }
  }
  write_text(paths.profiles, j.dump(2) + "\n");
  std::cerr << "[analyze] " << profiles.size() << " profiles written to " << paths.profiles
            << "\n";
}

void stage_report(const PipelineConfig& cfg) {
  const auto paths = StagePaths::in(cfg.output_dir);
  require_artifact(paths.embeddings, "embed");
  require_artifact(paths.clusters, "cluster");
  require_artifact(paths.corpus, "generate");

  auto X = embedstore::load_matrix(paths.embeddings);
  auto clusters_json = read_json_file(paths.clusters);
  auto labels = labels_for_matrix(clusters_json, X);
  auto records = corpus::load_corpus(paths.corpus);
  auto tones = tone_by_id(records);

  // Projection
  projection::Projection2D proj;
  if (cfg.projection.method == projection::Method::pca) {
    proj = projection::pca2d(X);
  } else {
    proj = projection::umap2d(X, cfg.projection.umap_n_neighbors, cfg.projection.umap_min_dist,
                              cfg.projection_seed());
  }
  ordered_json proj_json;
  proj_json["method"] = projection::method_name(proj.method);
  if (proj.explained_variance)
    proj_json["explained_variance"] = {(*proj.explained_variance)[0],
                                       (*proj.explained_variance)[1]};
  proj_json["ids"] = proj.ids;
  proj_json["coords"] = ordered_json::array();
  for (size_t i = 0; i < proj.ids.size(); ++i)
    proj_json["coords"].push_back({proj.coords[i * 2], proj.coords[i * 2 + 1]});
  write_text(paths.projection, proj_json.dump(2) + "\n");

  // Composition
  auto composition = report::cluster_composition(labels, X.ids, tones);
  auto composition_json = report::composition_to_json(composition);

  // Representatives (optional)
  representatives::RepresentativeSet reps;
  std::optional<ordered_json> reps_json;
  if (std::filesystem::exists(paths.representatives_json)) {
    reps_json = read_json_file(paths.representatives_json);
    std::map<std::string, size_t> row_of;
    for (size_t i = 0; i < X.n; ++i) row_of[X.ids[i]] = i;
    reps.m = reps_json->value("m", 3);
    for (const auto& cluster : reps_json->value("clusters", ordered_json::array())) {
      const int cluster_id = cluster.value("cluster", -1);
      auto& slot = reps.per_cluster[cluster_id];
      for (const char* kind : {"central", "peripheral"}) {
        for (const auto& entry : cluster.value(kind, ordered_json::array())) {
          representatives::RepEntry rep;
          rep.story_id = entry.value("story_id", std::string{});
          rep.mean_dist = entry.value("mean_dist", 0.0);
          auto it = row_of.find(rep.story_id);
          if (it == row_of.end())
            raise(Errc::IdMismatch, "representative " + rep.story_id + " not in the matrix");
          rep.row = it->second;
          if (kind == std::string("central")) slot.central.push_back(rep);
          else slot.peripheral.push_back(rep);
        }
      }
    }
  }

  // Figures
  std::vector<std::string> figures;
  std::filesystem::create_directories(paths.figures_dir);
  write_text(paths.figures_dir / "scatter.svg",
             report::render_scatter_svg(proj, labels, reps, &composition));
  figures.push_back("figures/scatter.svg");

  std::optional<ordered_json> profiles_json;
  if (std::filesystem::exists(paths.profiles)) {
    profiles_json = read_json_file(paths.profiles);
    for (const auto& pj : profiles_json->value("profiles", ordered_json::array())) {
      auto profile = profile_from_json(pj);
      if (profile.counts.empty()) continue;
      if (profile.group_key.rfind("cluster_", 0) == 0) continue;  // tone clouds only
      const std::string kind = lexical::profile_kind_name(profile.kind);
      const std::string filename = kind + "_" + profile.group_key + ".svg";
      write_text(paths.figures_dir / filename,
                 report::render_wordcloud_svg(profile, cfg.max_cloud_terms));
      figures.push_back("figures/" + filename);
    }
  }

  report::ReportInputs inputs;
  inputs.projection = proj_json;
  inputs.composition = composition_json;
  inputs.clustering = clusters_json;
  inputs.representatives = reps_json;
  inputs.profiles = profiles_json;
  if (std::filesystem::exists(paths.grid_report))
    inputs.grid_report = read_json_file(paths.grid_report);

  // Corpus summary recomputed from the corpus file itself.
  corpus::CorpusSummary summary;
  summary.planned = records.size();
  for (const auto& rec : records)
    ++summary.counts[{corpus::template_kind_name(rec.template_kind), rec.skin_tone}];
  inputs.corpus_summary = summary_to_json(summary);

  inputs.figures = figures;
  report::emit_report(inputs, cfg.output_dir);
  std::cerr << "[report] wrote " << paths.report_json << ", " << paths.report_md << " and "
            << figures.size() << " figure(s)\n";
}

void run_all(const PipelineConfig& cfg) {
  auto summary = stage_generate(cfg);
  if (summary.failed > 0)
    raise(Errc::TransportError,
          std::to_string(summary.failed) + " generation job(s) failed; see failures.jsonl");
  stage_embed(cfg);
  stage_validate(cfg);
  stage_cluster(cfg);
  stage_select(cfg);
  stage_analyze(cfg);
  stage_report(cfg);
}

}  // namespace discourse::pipeline
