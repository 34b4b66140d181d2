#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "discourse/lexical.hpp"
#include "discourse/projection.hpp"
#include "discourse/representatives.hpp"

namespace discourse::report {

struct ToneShare {
  size_t count = 0;
  double percentage = 0.0;
};

struct ClusterComposition {
  std::map<int, std::map<std::string, ToneShare>> per_cluster;
  size_t noise_count = 0;
  size_t total = 0;
};

// Per-cluster skin-tone counts and percentages; noise reported separately.
ClusterComposition cluster_composition(const std::vector<int>& labels,
                                       const std::vector<std::string>& ids,
                                       const std::map<std::string, std::string>& tone_by_id);

struct ScatterStyle {
  std::vector<std::string> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::string noise_color = "#999999";
  std::string central_stroke = "#ffd700";   // X marker, minimal mean distance
  std::string peripheral_stroke = "#d62728";  // X marker, maximal mean distance
};

// One circle per story colored by cluster (noise gray); representatives drawn
// as X markers. The legend carries composition percentages when available.
std::string render_scatter_svg(const projection::Projection2D& proj,
                               const std::vector<int>& labels,
                               const representatives::RepresentativeSet& reps,
                               const ClusterComposition* composition = nullptr,
                               const ScatterStyle& style = {});

// Deterministic spiral layout; font size follows sqrt(count) scaled into
// [12, 72] px.
std::string render_wordcloud_svg(const lexical::LexicalProfile& profile, int max_terms = 60);

// Everything emit_report can stitch together; absent sections are noted in
// the output rather than fatal.
struct ReportInputs {
  std::optional<nlohmann::ordered_json> corpus_summary;
  std::optional<nlohmann::ordered_json> grid_report;
  std::optional<nlohmann::ordered_json> clustering;
  std::optional<nlohmann::ordered_json> composition;
  std::optional<nlohmann::ordered_json> representatives;
  std::optional<nlohmann::ordered_json> profiles;
  std::optional<nlohmann::ordered_json> projection;
  std::vector<std::string> figures;  // paths relative to the report directory
};

// Writes report.json and report.md into out_dir.
void emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

nlohmann::ordered_json composition_to_json(const ClusterComposition& comp);

}  // namespace discourse::report
