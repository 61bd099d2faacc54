#pragma once

#include <string>
#include <vector>

#include "hgcl/polar.hpp"
#include "hgcl/train.hpp"
#include "hgcl/tsne.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Full run configuration. Defaults follow the reference Yelp2018 settings
/// (d=64, K=3, K*=1, lambda=0.2, epsilon=0.2, tau=0.15, rho=8, theta=4,
/// batch 2048, lr 1e-4).
struct RunConfig {
  // Shared training hyperparameters (both stages).
  Index d = 64;
  int k = 3;
  int k_star = 1;
  Scalar lambda = 0.2;
  Scalar epsilon = 0.2;
  Scalar tau = 0.15;
  Scalar lr = 1e-4;
  Index batch_size = 2048;
  int epochs = 50;           // stage-1
  int finetune_epochs = 50;  // stage-3
  Scalar l2_coeff = 1e-4;
  int patience = 0;

  // Clustering.
  Index rho = 8;
  Index theta = 4;
  RadialMode radial_mode = RadialMode::kQuantile;

  // Projection.
  Scalar perplexity = 30.0;
  int tsne_iters = 1000;
  Scalar tsne_lr = 200.0;
  Scalar tsne_exaggeration = 12.0;
  int tsne_exaggeration_iters = 250;
  int tsne_momentum_switch = 250;
  bool tsne_student_t_input = false;
  Index tsne_subsample = 0;

  // Evaluation.
  Index eval_k = 20;
  int neg_per_user = 10;
  Scalar val_fraction = 0.05;

  // Run plumbing.
  std::uint64_t seed = 42;
  std::string train_file;
  std::string test_file;

  // Sweep grids; empty lists fall back to the single configured value.
  std::vector<Index> sweep_rho;
  std::vector<Index> sweep_theta;
  std::vector<Scalar> sweep_perplexity;

  TrainConfig pretrain_config() const;
  TrainConfig finetune_config() const;
  TsneConfig tsne_config() const;

  /// Cross-field checks; throws std::invalid_argument naming the key.
  void validate() const;
};

/// Line-based `key = value` file; `#` starts a comment; blank lines ignored;
/// unknown keys, type mismatches, and out-of-range values are rejected with
/// the key named. An empty file yields all defaults.
RunConfig parse_config(const std::string& path);

/// Apply one `key = value` assignment (shared by the parser and CLI
/// overrides).
void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value);

}  // namespace hgcl
