// Command-line front end for the hierarchical graph contrastive recommender.
//
//   hgcl <pretrain|reduce|cluster|finetune|evaluate|sweep|all>
//        --config <path> [--force] [--seed N] [--out <dir>]
//
// Stages consume the artifacts of earlier stages from the run directory and
// skip themselves when their inputs and parameters are unchanged (--force
// overrides). HGCL_THREADS controls evaluation parallelism (default 1).

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hgcl/config.hpp"
#include "hgcl/pipeline.hpp"

namespace {

int env_threads() {
  const char* raw = std::getenv("HGCL_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 1) {
    throw std::runtime_error("HGCL_THREADS must be a positive integer, got '" +
                             std::string(raw) + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical graph contrastive learning recommender"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "run";
  bool force = false;
  bool has_seed_override = false;
  std::uint64_t seed_override = 0;

  const char* kStages[] = {"pretrain", "reduce",   "cluster", "finetune",
                           "evaluate", "sweep",    "all"};
  for (const char* name : kStages) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration file")
        ->required();
    sub->add_flag("--force", force, "rerun stages even when up to date");
    sub->add_option("--seed", seed_override, "override the configured seed")
        ->each([&has_seed_override](const std::string&) {
          has_seed_override = true;
        });
    sub->add_option("--out", out_dir, "run directory (default: run)");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    hgcl::RunConfig cfg = hgcl::parse_config(config_path);
    if (has_seed_override) cfg.seed = seed_override;
    cfg.validate();

    hgcl::PipelineOptions opt;
    opt.out_dir = out_dir;
    opt.force = force;
    opt.threads = env_threads();

    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "sweep") {
      hgcl::run_sweep(cfg, opt);
    } else {
      const std::vector<hgcl::Stage> stages = hgcl::stages_from_name(stage);
      hgcl::run_pipeline(cfg, stages, opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
