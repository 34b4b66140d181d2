#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "discourse/errors.hpp"
#include "discourse/pipeline.hpp"

namespace {

struct StageArgs {
  std::string config_path;
  discourse::pipeline::CliOverrides overrides;
};

void add_common_options(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Pipeline config JSON")->required();
  cmd->add_option("--output-dir", args.overrides.output_dir,
                  "Directory for stage artifacts (overrides config)");
  cmd->add_option("--backend", args.overrides.backend, "stub or live (overrides config)")
      ->check(CLI::IsMember({"stub", "live"}));
  cmd->add_option("--seed", args.overrides.seed, "Global seed (overrides config)");
  cmd->add_option("--names", args.overrides.names_csv, "Names CSV path (overrides config)");
}

int run_stage(const StageArgs& args, const std::string& stage) {
  using namespace discourse;
  pipeline::PipelineConfig cfg = pipeline::load_config(args.config_path);
  pipeline::apply_overrides(cfg, args.overrides);

  if (stage == "generate") {
    auto summary = pipeline::stage_generate(cfg);
    if (summary.failed > 0) {
      std::cerr << "error: " << summary.failed
                << " generation job(s) failed; see failures.jsonl\n";
      return 2;
    }
  } else if (stage == "embed") {
    pipeline::stage_embed(cfg);
  } else if (stage == "validate") {
    pipeline::stage_validate(cfg);
  } else if (stage == "cluster") {
    pipeline::stage_cluster(cfg);
  } else if (stage == "select") {
    pipeline::stage_select(cfg);
  } else if (stage == "analyze") {
    pipeline::stage_analyze(cfg);
  } else if (stage == "report") {
    pipeline::stage_report(cfg);
  } else if (stage == "run-all") {
    pipeline::run_all(cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discourse-cluster: corpus-to-clusters audit pipeline"};
  app.require_subcommand(1);

  const std::map<std::string, std::string> stages = {
      {"generate", "Expand prompt templates and generate the story corpus"},
      {"embed", "Encode the corpus into an embedding matrix"},
      {"validate", "Kernel-SVM cross-validation grid over the embeddings"},
      {"cluster", "Search clustering configurations by Variance Ratio Criterion"},
      {"select", "Pick central/peripheral representative stories per cluster"},
      {"analyze", "Word and adjective frequency profiles per group"},
      {"report", "Projection, figures and the consolidated report bundle"},
      {"run-all", "All stages in order"},
  };

  std::map<std::string, StageArgs> args;
  for (const auto& [name, description] : stages)
    add_common_options(app.add_subcommand(name, description), args[name]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    return run_stage(args[stage], stage);
  } catch (const discourse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == discourse::Errc::InvalidConfig ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
