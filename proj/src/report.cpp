#include "discourse/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "discourse/errors.hpp"

namespace discourse::report {

using nlohmann::ordered_json;

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string fmt(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

size_t codepoint_count(const std::string& s) {
  size_t count = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++count;
  return count;
}

}  // namespace

ClusterComposition cluster_composition(const std::vector<int>& labels,
                                       const std::vector<std::string>& ids,
                                       const std::map<std::string, std::string>& tone_by_id) {
  if (labels.size() != ids.size())
    raise(Errc::IdMismatch, "labels and ids have different lengths");

  ClusterComposition comp;
  comp.total = labels.size();
  std::map<int, std::map<std::string, size_t>> counts;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = tone_by_id.find(ids[i]);
    if (it == tone_by_id.end())
      raise(Errc::IdMismatch, "story id missing from corpus metadata: " + ids[i]);
    if (labels[i] < 0) {
      ++comp.noise_count;
    } else {
      ++counts[labels[i]][it->second];
    }
  }
  for (const auto& [cluster, tones] : counts) {
    size_t cluster_total = 0;
    for (const auto& [tone, count] : tones) cluster_total += count;
    for (const auto& [tone, count] : tones) {
      ToneShare share;
      share.count = count;
      share.percentage = 100.0 * static_cast<double>(count) / static_cast<double>(cluster_total);
      comp.per_cluster[cluster][tone] = share;
    }
  }
  return comp;
}

ordered_json composition_to_json(const ClusterComposition& comp) {
  ordered_json j;
  j["total"] = comp.total;
  j["noise_count"] = comp.noise_count;
  j["clusters"] = ordered_json::array();
  for (const auto& [cluster, tones] : comp.per_cluster) {
    ordered_json entry;
    entry["cluster"] = cluster;
    entry["tones"] = ordered_json::array();
    for (const auto& [tone, share] : tones)
      entry["tones"].push_back(ordered_json{
          {"tone", tone}, {"count", share.count}, {"percentage", share.percentage}});
    j["clusters"].push_back(std::move(entry));
  }
  return j;
}

std::string render_scatter_svg(const projection::Projection2D& proj,
                               const std::vector<int>& labels,
                               const representatives::RepresentativeSet& reps,
                               const ClusterComposition* composition, const ScatterStyle& style) {
  const size_t n = proj.ids.size();
  if (labels.size() != n) raise(Errc::IdMismatch, "labels and projection ids differ in length");
  if (proj.coords.size() != n * 2) raise(Errc::IdMismatch, "projection coords/ids mismatch");
  for (const auto& [cluster, cluster_reps] : reps.per_cluster) {
    for (const auto* list : {&cluster_reps.central, &cluster_reps.peripheral})
      for (const auto& entry : *list) {
        if (entry.row >= n || proj.ids[entry.row] != entry.story_id)
          raise(Errc::IdMismatch, "representative " + entry.story_id +
                                      " does not match the projection row order");
      }
  }

  const double width = 960;
  const double height = 680;
  const double margin = 42;
  double min_x = 0.0;
  double max_x = 1.0;
  double min_y = 0.0;
  double max_y = 1.0;
  if (n > 0) {
    min_x = max_x = proj.coords[0];
    min_y = max_y = proj.coords[1];
    for (size_t i = 0; i < n; ++i) {
      min_x = std::min(min_x, proj.coords[i * 2]);
      max_x = std::max(max_x, proj.coords[i * 2]);
      min_y = std::min(min_y, proj.coords[i * 2 + 1]);
      max_y = std::max(max_y, proj.coords[i * 2 + 1]);
    }
  }
  const double span_x = max_x - min_x > 1e-12 ? max_x - min_x : 1.0;
  const double span_y = max_y - min_y > 1e-12 ? max_y - min_y : 1.0;
  auto sx = [&](double x) { return margin + (x - min_x) / span_x * (width - 2 * margin); };
  auto sy = [&](double y) { return height - margin - (y - min_y) / span_y * (height - 2 * margin); };

  auto color_of = [&](int label) -> std::string {
    if (label < 0) return style.noise_color;
    return style.palette[static_cast<size_t>(label) % style.palette.size()];
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";

  for (size_t i = 0; i < n; ++i) {
    svg << "  <circle cx=\"" << fmt(sx(proj.coords[i * 2])) << "\" cy=\""
        << fmt(sy(proj.coords[i * 2 + 1])) << "\" r=\"3\" fill=\"" << color_of(labels[i])
        << "\" fill-opacity=\"0.75\"/>\n";
  }

  auto draw_x = [&](const representatives::RepEntry& entry, const std::string& stroke) {
    const double x = sx(proj.coords[entry.row * 2]);
    const double y = sy(proj.coords[entry.row * 2 + 1]);
    svg << "  <path class=\"rep\" d=\"M " << fmt(x - 5) << " " << fmt(y - 5) << " L " << fmt(x + 5)
        << " " << fmt(y + 5) << " M " << fmt(x - 5) << " " << fmt(y + 5) << " L " << fmt(x + 5)
        << " " << fmt(y - 5) << "\" stroke=\"" << stroke
        << "\" stroke-width=\"2.2\" fill=\"none\"/>\n";
  };
  for (const auto& [cluster, cluster_reps] : reps.per_cluster) {
    for (const auto& entry : cluster_reps.central) draw_x(entry, style.central_stroke);
    for (const auto& entry : cluster_reps.peripheral) draw_x(entry, style.peripheral_stroke);
  }

  // Legend: swatches plus per-cluster composition when available.
  std::map<int, size_t> sizes;
  size_t noise = 0;
  for (int label : labels) {
    if (label < 0) ++noise;
    else ++sizes[label];
  }
  double ly = 26;
  const double lx = width - 300;
  svg << "  <g font-family=\"sans-serif\" font-size=\"13\">\n";
  for (const auto& [cluster, size] : sizes) {
    svg << "    <rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly - 11) << "\" width=\"12\" "
        << "height=\"12\" fill=\"" << color_of(cluster) << "\"/>\n";
    std::string text = "cluster " + std::to_string(cluster) + " (n=" + std::to_string(size) + ")";
    if (composition) {
      auto it = composition->per_cluster.find(cluster);
      if (it != composition->per_cluster.end()) {
        for (const auto& [tone, share] : it->second)
          text += " " + tone + " " + fmt(share.percentage, 1) + "%";
      }
    }
    svg << "    <text x=\"" << fmt(lx + 18) << "\" y=\"" << fmt(ly) << "\">" << xml_escape(text)
        << "</text>\n";
    ly += 20;
  }
  if (noise > 0) {
    svg << "    <rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly - 11) << "\" width=\"12\" "
        << "height=\"12\" fill=\"" << style.noise_color << "\"/>\n";
    svg << "    <text x=\"" << fmt(lx + 18) << "\" y=\"" << fmt(ly) << "\">noise (n="
        << noise << ")</text>\n";
    ly += 20;
  }
  svg << "    <text x=\"" << fmt(lx) << "\" y=\"" << fmt(ly + 4)
      << "\">X yellow = central, X red = peripheral</text>\n";
  svg << "  </g>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_wordcloud_svg(const lexical::LexicalProfile& profile, int max_terms) {
  if (profile.counts.empty())
    raise(Errc::EmptyProfile, "profile " + profile.group_key + " has no terms");
  const size_t take = std::min(profile.counts.size(), static_cast<size_t>(max_terms));

  const double width = 900;
  const double height = 560;
  const double cx = width / 2;
  const double cy = height / 2;
  const double cmax = static_cast<double>(profile.counts[0].second);

  static const char* kCloudPalette[] = {"#1f77b4", "#b44a1f", "#2c7a2c", "#6a3d9a",
                                        "#23747a", "#8a5a19", "#a02c50", "#44585e"};

  struct Box {
    double x0, y0, x1, y1;
  };
  std::vector<Box> placed;
  auto overlaps = [&](const Box& b) {
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > width || b.y1 > height) return true;
    for (const auto& other : placed) {
      if (b.x0 < other.x1 && other.x0 < b.x1 && b.y0 < other.y1 && other.y0 < b.y1) return true;
    }
    return false;
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";
  svg << "  <g font-family=\"sans-serif\" text-anchor=\"middle\">\n";

  for (size_t rank = 0; rank < take; ++rank) {
    const auto& [term, count] = profile.counts[rank];
    const double font =
        std::clamp(72.0 * std::sqrt(static_cast<double>(count) / cmax), 12.0, 72.0);
    const double half_w = 0.30 * font * static_cast<double>(codepoint_count(term)) + 2.0;
    const double half_h = 0.54 * font + 2.0;

    // Archimedean spiral out from the canvas center.
    double x = cx;
    double y = cy;
    for (int step = 0; step < 6000; ++step) {
      const double theta = 0.30 * step;
      x = cx + 1.2 * theta * std::cos(theta);
      y = cy + 1.2 * theta * std::sin(theta);
      Box candidate{x - half_w, y - half_h, x + half_w, y + half_h};
      if (!overlaps(candidate)) break;
    }
    placed.push_back({x - half_w, y - half_h, x + half_w, y + half_h});

    svg << "    <text x=\"" << fmt(x) << "\" y=\"" << fmt(y + 0.35 * font) << "\" font-size=\""
        << fmt(font, 1) << "\" fill=\"" << kCloudPalette[rank % std::size(kCloudPalette)] << "\">"
        << xml_escape(term) << "</text>\n";
  }
  svg << "  </g>\n";
  svg << "</svg>\n";
  return svg.str();
}

namespace {

void markdown_composition(std::ostringstream& md, const ordered_json& comp) {
  md << "| cluster | tone | count | share |\n|---|---|---|---|\n";
  for (const auto& cluster : comp.value("clusters", ordered_json::array())) {
    for (const auto& tone : cluster.value("tones", ordered_json::array())) {
      md << "| " << cluster.value("cluster", -1) << " | " << tone.value("tone", std::string{})
         << " | " << tone.value("count", 0) << " | " << fmt(tone.value("percentage", 0.0), 1)
         << "% |\n";
    }
  }
  md << "\nNoise stories: " << comp.value("noise_count", 0) << " of " << comp.value("total", 0)
     << "\n";
}

}  // namespace

void emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir) {
  const bool any = inputs.corpus_summary || inputs.grid_report || inputs.clustering ||
                   inputs.composition || inputs.representatives || inputs.profiles ||
                   inputs.projection;
  if (!any) raise(Errc::InvalidArgument, "no stage outputs to report");
  std::filesystem::create_directories(out_dir);

  ordered_json j;
  std::vector<std::string> missing;
  auto put = [&](const char* key, const std::optional<ordered_json>& section) {
    if (section) {
      j[key] = *section;
    } else {
      missing.push_back(key);
    }
  };
  put("corpus_summary", inputs.corpus_summary);
  put("svm_validation", inputs.grid_report);
  put("clustering", inputs.clustering);
  put("composition", inputs.composition);
  put("representatives", inputs.representatives);
  put("lexical_profiles", inputs.profiles);
  put("projection", inputs.projection);
  j["figures"] = inputs.figures;
  j["missing_sections"] = missing;

  {
    std::ofstream out(out_dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::WriteError, "cannot write report.json");
    out << j.dump(2) << "\n";
    if (!out) raise(Errc::WriteError, "write failed: report.json");
  }

  std::ostringstream md;
  md << "# Discourse clustering audit\n";

  md << "\n## Corpus\n\n";
  if (inputs.corpus_summary) {
    const auto& cs = *inputs.corpus_summary;
    md << "| template | tone | stories |\n|---|---|---|\n";
    for (const auto& row : cs.value("counts", ordered_json::array())) {
      md << "| " << row.value("template", std::string{}) << " | "
         << row.value("skin_tone", std::string{}) << " | " << row.value("count", 0) << " |\n";
    }
    md << "\nTotal stories: " << cs.value("total", 0) << "\n";
  } else {
    md << "_Not available: run the `generate` stage._\n";
  }

  md << "\n## Embedding validation (SVM grid)\n\n";
  if (inputs.grid_report) {
    const auto& gr = *inputs.grid_report;
    md << "Trainings: " << gr.value("training_count", 0) << " (failed "
       << gr.value("failed_count", 0) << ")\n\n";
    md << "Overall accuracy: " << fmt(100.0 * gr.value("overall_mean", 0.0), 2) << "% ± "
       << fmt(100.0 * gr.value("overall_std", 0.0), 2) << "%\n\n";
    md << "| kernel | C | mean accuracy |\n|---|---|---|\n";
    for (const auto& pc : gr.value("per_config_mean", ordered_json::array())) {
      md << "| " << pc.value("kernel", std::string{}) << " | " << pc.value("C", 0.0) << " | "
         << fmt(100.0 * pc.value("mean_accuracy", 0.0), 2) << "% |\n";
    }
  } else {
    md << "_Not available: run the `validate` stage._\n";
  }

  md << "\n## Clustering\n\n";
  if (inputs.clustering) {
    const auto& cl = *inputs.clustering;
    md << "Best algorithm: **" << cl.value("algorithm", std::string{}) << "** with params `"
       << cl.value("params", ordered_json::object()).dump() << "`\n\n";
    md << "Variance Ratio Criterion: " << fmt(cl.value("vrc", 0.0), 2) << "\n\n";
    md << "Clusters: " << cl.value("n_clusters", 0) << ", noise stories: "
       << cl.value("noise_count", 0) << "\n";
  } else {
    md << "_Not available: run the `cluster` stage._\n";
  }

  md << "\n## Cluster composition by skin tone\n\n";
  if (inputs.composition) {
    markdown_composition(md, *inputs.composition);
  } else {
    md << "_Not available: run the `report` stage with clustering outputs present._\n";
  }

  md << "\n## Representative stories\n\n";
  if (inputs.representatives) {
    md << "| cluster | kind | story id | mean distance |\n|---|---|---|---|\n";
    for (const auto& cluster : inputs.representatives->value("clusters", ordered_json::array())) {
      for (const char* kind : {"central", "peripheral"}) {
        for (const auto& entry : cluster.value(kind, ordered_json::array())) {
          md << "| " << cluster.value("cluster", -1) << " | " << kind << " | "
             << entry.value("story_id", std::string{}) << " | "
             << fmt(entry.value("mean_dist", 0.0), 4) << " |\n";
        }
      }
    }
  } else {
    md << "_Not available: run the `select` stage._\n";
  }

  md << "\n## Lexical profiles\n\n";
  if (inputs.profiles) {
    for (const auto& profile : inputs.profiles->value("profiles", ordered_json::array())) {
      md << "**" << profile.value("group_key", std::string{}) << "** ("
         << profile.value("kind", std::string{}) << "): ";
      size_t shown = 0;
      for (const auto& term : profile.value("top", ordered_json::array())) {
        if (shown++ >= 12) break;
        if (shown > 1) md << ", ";
        md << term.value("term", std::string{}) << " (" << term.value("count", 0) << ")";
      }
      md << "\n\n";
    }
  } else {
    md << "_Not available: run the `analyze` stage._\n";
  }

  md << "\n## Figures\n\n";
  if (inputs.figures.empty()) {
    md << "_No figures emitted._\n";
  } else {
    for (const auto& fig : inputs.figures) md << "![figure](" << fig << ")\n\n";
  }

  {
    std::ofstream out(out_dir / "report.md", std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::WriteError, "cannot write report.md");
    out << md.str();
    if (!out) raise(Errc::WriteError, "write failed: report.md");
  }
}

}  // namespace discourse::report
