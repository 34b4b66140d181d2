#pragma once

#include <filesystem>

#include "discourse/corpus.hpp"
#include "discourse/pipeline_config.hpp"

namespace discourse::pipeline {

// Stage artifacts live under output_dir; every stage reads and writes only
// these files.
struct StagePaths {
  std::filesystem::path corpus;
  std::filesystem::path failures;
  std::filesystem::path embeddings;
  std::filesystem::path grid_report;
  std::filesystem::path clusters;
  std::filesystem::path representatives_json;
  std::filesystem::path representatives_dir;
  std::filesystem::path profiles;
  std::filesystem::path projection;
  std::filesystem::path report_json;
  std::filesystem::path report_md;
  std::filesystem::path figures_dir;

  static StagePaths in(const std::filesystem::path& output_dir);
};

corpus::CorpusSummary stage_generate(const PipelineConfig& cfg);
void stage_embed(const PipelineConfig& cfg);
void stage_validate(const PipelineConfig& cfg);
void stage_cluster(const PipelineConfig& cfg);
void stage_select(const PipelineConfig& cfg);
void stage_analyze(const PipelineConfig& cfg);
void stage_report(const PipelineConfig& cfg);

// All stages in order; throws on the first fatal error.
void run_all(const PipelineConfig& cfg);

}  // namespace discourse::pipeline
