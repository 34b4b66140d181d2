#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "discourse/endpoints.hpp"

namespace discourse::corpus {

struct NameEntry {
  std::string country;
  std::string name;
};

struct NameTable {
  std::vector<NameEntry> entries;  // deduplicated, file order
};

// CSV with header `country,name`, UTF-8 (BOM tolerated). Duplicate rows are
// dropped with a warning.
NameTable load_names(const std::filesystem::path& path);

struct GenerationPlan {
  std::vector<std::string> skin_tones{"negra", "branca"};
  int reps_per_name = 5;
  int nameless_per_tone = 525;
  endpoints::GenerationParams params;
  int64_t base_seed = 42;
};
void validate(const GenerationPlan& plan);

enum class TemplateKind { named, nameless };
const char* template_kind_name(TemplateKind kind) noexcept;
TemplateKind template_kind_from_name(const std::string& name);

struct PromptJob {
  std::string id;  // content hash, stable across resumes
  TemplateKind template_kind = TemplateKind::named;
  std::string skin_tone;
  std::optional<std::string> name;
  std::optional<std::string> country;
  int replicate = 0;
  std::string prompt;
  int64_t seed = 0;
};

// name × tone × reps_per_name jobs from the named template, plus
// nameless_per_tone jobs per tone from the nameless template.
std::vector<PromptJob> expand_prompts(const GenerationPlan& plan, const NameTable& names);

struct StoryRecord {
  std::string id;
  TemplateKind template_kind = TemplateKind::named;
  std::string skin_tone;
  std::optional<std::string> name;
  std::optional<std::string> country;
  int replicate = 0;
  std::string prompt;
  std::string text;
  std::string model_id;
  endpoints::GenerationParams params;
  int64_t seed = 0;
  std::string created_at;
};

std::string story_record_to_json_line(const StoryRecord& record);
StoryRecord story_record_from_json_line(const std::string& line, size_t line_number);

struct CorpusSummary {
  size_t planned = 0;
  size_t written = 0;  // new records this run
  size_t skipped = 0;  // ids already present
  size_t failed = 0;
  // (template kind, tone) -> record count over the whole corpus file
  std::map<std::pair<std::string, std::string>, size_t> counts;
};

struct RunOptions {
  int max_concurrency = 4;
  // Fixed timestamp for reproducible runs; empty uses the wall clock.
  std::string created_at_override;
};

// Appends one JSONL record per completed job. Jobs whose ids already exist in
// the corpus file are skipped, so interrupted runs can resume; a torn final
// line from a crash is truncated away first. Failed jobs land in a
// `failures.jsonl` sidecar and do not abort the run.
CorpusSummary run_generation(const std::vector<PromptJob>& jobs,
                             endpoints::TextGenerator& backend,
                             const endpoints::GenerationParams& params,
                             const std::filesystem::path& corpus_path, const RunOptions& opts);

std::vector<StoryRecord> load_corpus(const std::filesystem::path& path);

}  // namespace discourse::corpus
