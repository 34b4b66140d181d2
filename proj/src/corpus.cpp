#include "discourse/corpus.hpp"

#include <algorithm>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "discourse/errors.hpp"
#include "discourse/hashing.hpp"
#include "discourse/parallel.hpp"
#include "discourse/rng.hpp"

namespace discourse::corpus {

using nlohmann::ordered_json;

namespace {

std::string strip_bom(std::string line) {
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
    line.erase(0, 3);
  return line;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line, size_t line_number) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted)
    raise(Errc::ParseError, "line " + std::to_string(line_number) + ": unterminated quote");
  fields.push_back(field);
  return fields;
}

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string job_id(TemplateKind kind, const std::string& tone, const std::string& country,
                   const std::string& name, int replicate) {
  std::string key = std::string(template_kind_name(kind)) + "|" + tone + "|" + country + "|" +
                    name + "|" + std::to_string(replicate);
  return hex64(fnv1a64(key));
}

}  // namespace

const char* template_kind_name(TemplateKind kind) noexcept {
  return kind == TemplateKind::named ? "named" : "nameless";
}

TemplateKind template_kind_from_name(const std::string& name) {
  if (name == "named") return TemplateKind::named;
  if (name == "nameless") return TemplateKind::nameless;
  raise(Errc::ParseError, "unknown template kind: " + name);
}

NameTable load_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open names file: " + path.string());

  NameTable table;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  size_t line_number = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (line_number == 1) line = strip_bom(line);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, line_number);
    if (!header_checked) {
      if (fields.size() != 2 || trim(fields[0]) != "country" || trim(fields[1]) != "name")
        raise(Errc::ParseError,
              "line " + std::to_string(line_number) + ": expected header `country,name`");
      header_checked = true;
      continue;
    }
    if (fields.size() != 2)
      raise(Errc::ParseError, "line " + std::to_string(line_number) + ": expected 2 fields, got " +
                                  std::to_string(fields.size()));
    std::string country = trim(fields[0]);
    std::string name = trim(fields[1]);
    if (country.empty())
      raise(Errc::ParseError, "line " + std::to_string(line_number) + ": empty country code");
    if (name.empty())
      raise(Errc::ParseError, "line " + std::to_string(line_number) + ": empty name");
    if (!seen.insert({country, name}).second) {
      std::cerr << "[corpus] warning: duplicate name row skipped at line " << line_number << " ("
                << country << "," << name << ")\n";
      continue;
    }
    table.entries.push_back({std::move(country), std::move(name)});
  }
  if (!header_checked) raise(Errc::ParseError, "names file is empty (missing header)");
  if (table.entries.empty()) raise(Errc::EmptyTable, "names file has no data rows");
  return table;
}

void validate(const GenerationPlan& plan) {
  if (plan.skin_tones.empty()) raise(Errc::InvalidConfig, "plan needs at least one skin tone");
  for (const auto& tone : plan.skin_tones)
    if (tone.empty()) raise(Errc::InvalidConfig, "skin tones must be non-empty strings");
  if (plan.reps_per_name <= 0) raise(Errc::InvalidConfig, "reps_per_name must be positive");
  if (plan.nameless_per_tone < 0)
    raise(Errc::InvalidConfig, "nameless_per_tone must be non-negative");
  endpoints::validate(plan.params);
}

std::vector<PromptJob> expand_prompts(const GenerationPlan& plan, const NameTable& names) {
  validate(plan);
  std::vector<PromptJob> jobs;
  jobs.reserve(names.entries.size() * plan.skin_tones.size() *
                   static_cast<size_t>(plan.reps_per_name) +
               plan.skin_tones.size() * static_cast<size_t>(plan.nameless_per_tone));

  auto derive_seed = [&](const std::string& id) {
    return static_cast<int64_t>(mix_seed(static_cast<uint64_t>(plan.base_seed), fnv1a64(id)));
  };

  for (const auto& entry : names.entries) {
    for (const auto& tone : plan.skin_tones) {
      for (int rep = 0; rep < plan.reps_per_name; ++rep) {
        PromptJob job;
        job.template_kind = TemplateKind::named;
        job.skin_tone = tone;
        job.name = entry.name;
        job.country = entry.country;
        job.replicate = rep;
        job.prompt = "Escreva um conto sobre uma mulher " + tone + " chamada " + entry.name;
        job.id = job_id(job.template_kind, tone, entry.country, entry.name, rep);
        job.seed = derive_seed(job.id);
        jobs.push_back(std::move(job));
      }
    }
  }
  for (const auto& tone : plan.skin_tones) {
    for (int rep = 0; rep < plan.nameless_per_tone; ++rep) {
      PromptJob job;
      job.template_kind = TemplateKind::nameless;
      job.skin_tone = tone;
      job.replicate = rep;
      job.prompt = "Escreva um conto sobre uma mulher " + tone;
      job.id = job_id(job.template_kind, tone, "", "", rep);
      job.seed = derive_seed(job.id);
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

std::string story_record_to_json_line(const StoryRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  j["template"] = template_kind_name(record.template_kind);
  j["skin_tone"] = record.skin_tone;
  if (record.name) j["name"] = *record.name;
  if (record.country) j["country"] = *record.country;
  j["replicate"] = record.replicate;
  j["prompt"] = record.prompt;
  j["text"] = record.text;
  j["model_id"] = record.model_id;
  j["params"] = ordered_json{{"temperature", record.params.temperature},
                             {"top_p", record.params.top_p},
                             {"max_new_tokens", record.params.max_new_tokens}};
  j["seed"] = record.seed;
  j["created_at"] = record.created_at;
  return j.dump();
}

StoryRecord story_record_from_json_line(const std::string& line, size_t line_number) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    raise(Errc::ParseError, "line " + std::to_string(line_number) + ": malformed corpus record");
  try {
    StoryRecord r;
    r.id = j.at("id").get<std::string>();
    r.template_kind = template_kind_from_name(j.at("template").get<std::string>());
    r.skin_tone = j.at("skin_tone").get<std::string>();
    if (j.contains("name")) r.name = j["name"].get<std::string>();
    if (j.contains("country")) r.country = j["country"].get<std::string>();
    r.replicate = j.value("replicate", 0);
    r.prompt = j.at("prompt").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.model_id = j.value("model_id", "");
    if (j.contains("params")) {
      const auto& p = j["params"];
      r.params.temperature = p.value("temperature", 0.8);
      r.params.top_p = p.value("top_p", 0.9);
      r.params.max_new_tokens = p.value("max_new_tokens", 1024);
    }
    r.seed = j.value("seed", int64_t{0});
    r.created_at = j.value("created_at", "");
    return r;
  } catch (const ordered_json::exception& e) {
    raise(Errc::ParseError,
          "line " + std::to_string(line_number) + ": bad corpus record: " + e.what());
  }
}

namespace {

struct ExistingCorpus {
  std::set<std::string> ids;
  std::map<std::pair<std::string, std::string>, size_t> counts;
  uintmax_t valid_bytes = 0;  // offset of the end of the last complete record
  bool torn_tail = false;
};

ExistingCorpus scan_existing(const std::filesystem::path& path) {
  ExistingCorpus out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string line;
  size_t line_number = 0;
  uintmax_t offset = 0;
  while (std::getline(in, line)) {
    ++line_number;
    bool has_newline = !in.eof();
    if (!has_newline) {
      // Crash mid-write: drop the torn tail and resume from here.
      out.torn_tail = true;
      break;
    }
    if (trim(line).empty()) {
      offset += line.size() + 1;
      continue;
    }
    StoryRecord rec = story_record_from_json_line(line, line_number);
    out.ids.insert(rec.id);
    ++out.counts[{template_kind_name(rec.template_kind), rec.skin_tone}];
    offset += line.size() + 1;
  }
  out.valid_bytes = offset;
  return out;
}

}  // namespace

CorpusSummary run_generation(const std::vector<PromptJob>& jobs,
                             endpoints::TextGenerator& backend,
                             const endpoints::GenerationParams& params,
                             const std::filesystem::path& corpus_path, const RunOptions& opts) {
  if (opts.max_concurrency < 1) raise(Errc::InvalidConfig, "max_concurrency must be >= 1");
  if (!corpus_path.parent_path().empty())
    std::filesystem::create_directories(corpus_path.parent_path());

  ExistingCorpus existing = scan_existing(corpus_path);
  if (existing.torn_tail) {
    std::cerr << "[corpus] truncating torn final record in " << corpus_path << "\n";
    std::filesystem::resize_file(corpus_path, existing.valid_bytes);
  }

  std::vector<const PromptJob*> todo;
  todo.reserve(jobs.size());
  for (const auto& job : jobs)
    if (!existing.ids.count(job.id)) todo.push_back(&job);

  CorpusSummary summary;
  summary.planned = jobs.size();
  summary.skipped = jobs.size() - todo.size();
  summary.counts = existing.counts;

  const std::string created_at =
      opts.created_at_override.empty() ? iso8601_utc_now() : opts.created_at_override;

  std::ofstream corpus_out(corpus_path, std::ios::app | std::ios::binary);
  if (!corpus_out) raise(Errc::WriteError, "cannot open corpus file: " + corpus_path.string());
  std::filesystem::path failures_path = corpus_path.parent_path() / "failures.jsonl";
  std::ofstream failures_out(failures_path, std::ios::trunc | std::ios::binary);
  if (!failures_out)
    raise(Errc::WriteError, "cannot open failures file: " + failures_path.string());

  struct Slot {
    bool done = false;
    bool ok = false;
    std::string record_line;
    std::string failure_line;
  };
  std::vector<Slot> slots(todo.size());
  std::mutex write_mutex;
  size_t next_write = 0;

  parallel_for(
      todo.size(),
      [&](size_t i) {
        const PromptJob& job = *todo[i];
        Slot slot;
        try {
          std::string text = backend.generate(job.prompt, job.seed);
          StoryRecord rec;
          rec.id = job.id;
          rec.template_kind = job.template_kind;
          rec.skin_tone = job.skin_tone;
          rec.name = job.name;
          rec.country = job.country;
          rec.replicate = job.replicate;
          rec.prompt = job.prompt;
          rec.text = std::move(text);
          rec.model_id = backend.model_id();
          rec.params = params;
          rec.seed = job.seed;
          rec.created_at = created_at;
          slot.record_line = story_record_to_json_line(rec);
          slot.ok = true;
        } catch (const std::exception& e) {
          ordered_json f{{"id", job.id}, {"prompt", job.prompt}, {"error", e.what()}};
          slot.failure_line = f.dump();
          slot.ok = false;
        }
        slot.done = true;

        // Drain the frontier in job order so the file layout is deterministic.
        std::lock_guard<std::mutex> lock(write_mutex);
        slots[i] = std::move(slot);
        while (next_write < slots.size() && slots[next_write].done) {
          Slot& s = slots[next_write];
          if (s.ok) {
            corpus_out << s.record_line << '\n';
            corpus_out.flush();
            ++summary.written;
          } else {
            failures_out << s.failure_line << '\n';
            failures_out.flush();
            ++summary.failed;
          }
          s.record_line.clear();
          s.failure_line.clear();
          ++next_write;
        }
      },
      static_cast<unsigned>(opts.max_concurrency));

  if (!corpus_out) raise(Errc::WriteError, "write to corpus file failed");

  // Skipped jobs are already in `counts` from the scan; add the new records.
  for (size_t i = 0; i < todo.size(); ++i)
    if (slots[i].ok)
      ++summary.counts[{template_kind_name(todo[i]->template_kind), todo[i]->skin_tone}];

  return summary;
}

std::vector<StoryRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::ParseError, "cannot open corpus file: " + path.string());
  std::vector<StoryRecord> records;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    bool has_newline = !in.eof();
    if (trim(line).empty()) continue;
    if (!has_newline) {
      // Tolerate a missing final newline only if the record parses.
      ordered_json probe = ordered_json::parse(line, nullptr, false);
      if (probe.is_discarded())
        raise(Errc::ParseError, "line " + std::to_string(line_number) +
                                    ": truncated record (rerun generate to repair)");
    }
    records.push_back(story_record_from_json_line(line, line_number));
  }
  return records;
}

}  // namespace discourse::corpus
