#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgcl/config.hpp"
#include "hgcl/eval.hpp"

namespace hgcl {

enum class Stage { kPretrain, kReduce, kCluster, kFinetune, kEvaluate };

/// "pretrain" -> {kPretrain}, ..., "all" -> the full ordered pipeline.
std::vector<Stage> stages_from_name(const std::string& name);

const char* stage_name(Stage s);

struct PipelineOptions {
  std::string out_dir = "run";
  bool force = false;
  int threads = 1;
  bool quiet = false;
};

struct PipelineResult {
  std::optional<EvalReport> report;  // set when the evaluate stage is reached
};

/// Run the requested stages in pipeline order. Each stage writes its
/// artifacts into out_dir and stamps the manifest; a stage whose parameter
/// digest and artifact digests already match is skipped unless `force`.
/// A stage whose upstream artifact is missing fails, naming the stage to run
/// first.
PipelineResult run_pipeline(const RunConfig& cfg,
                            std::span<const Stage> stages,
                            const PipelineOptions& opt);

/// Grid sweep over {rho, theta, perplexity} (empty grids fall back to the
/// configured single values). The stage-1 checkpoint is shared: pretrain runs
/// at most once in out_dir, and each cell replays reduce -> evaluate in
/// out_dir/sweep/<cell>. Emits out_dir/sweep.csv.
void run_sweep(const RunConfig& cfg, const PipelineOptions& opt);

/// FNV-1a 64-bit digest, hex-encoded; used for manifest stamps.
std::string digest_file(const std::string& path);
std::string digest_bytes(std::string_view bytes);

}  // namespace hgcl
