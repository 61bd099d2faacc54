#pragma once

#include <functional>
#include <vector>

#include "hgcl/embedding.hpp"
#include "hgcl/eval.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/rng.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Stage-1 training hyperparameters.
struct TrainConfig {
  Index d = 64;
  int K = 3;        // propagation depth
  int K_star = 1;   // contrasted intermediate layer
  Scalar lambda = 0.2;
  Scalar epsilon = 0.2;
  Scalar tau = 0.15;
  Scalar lr = 1e-4;
  Index batch_size = 2048;
  int epochs = 50;
  Scalar l2_coeff = 1e-4;
  std::uint64_t seed = 0;
  int patience = 0;  // 0 disables early stopping
  Index eval_k = 20;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct StepStats {
  int epoch = 0;
  Index step = 0;  // step index within the epoch
  Scalar bpr = 0.0;
  Scalar infonce = 0.0;  // unweighted contrastive term
  Scalar l2 = 0.0;
  Scalar total = 0.0;  // bpr + lambda * infonce + l2
};

struct EpochStats {
  int epoch = 0;
  Scalar bpr = 0.0;      // summed over the epoch's steps
  Scalar infonce = 0.0;
  Scalar l2 = 0.0;
  Scalar total = 0.0;
  Scalar val_recall = -1.0;  // negative when no validation ran
  Scalar val_ndcg = -1.0;
  bool improved = false;
};

using EpochHook = std::function<void(const EpochStats&)>;

struct PretrainResult {
  EmbeddingState state;  // noise-free forward from the selected parameters
  Matrix e0;             // selected layer-0 parameters
  int best_epoch = 0;    // 1-based; last epoch when no validation is given
  std::vector<EpochStats> history;
};

/// Shuffled edge ids split into ceil(|E|/batch_size) batches; the last batch
/// keeps the remainder.
std::vector<std::vector<Index>> epoch_schedule(Index edge_count,
                                               Index batch_size, Rng& rng);

/// XSimGCL-style pre-training: per batch one noise-perturbed forward feeds
/// both the BPR term on pooled embeddings and the cross-layer InfoNCE term;
/// lazily updated Adam on the layer-0 table. With epsilon == 0 no noise is
/// drawn and with lambda == 0 the contrastive pass is skipped entirely, which
/// reduces the trajectory to plain LightGCN-BPR. When `validation` is given,
/// epoch-end noise-free forwards are scored and the best Recall@eval_k epoch's
/// parameters are returned; otherwise the final parameters are.
PretrainResult pretrain(const BipartiteGraph& g, const TrainConfig& cfg,
                        const TestSet* validation = nullptr,
                        const EpochHook& hook = {},
                        std::vector<StepStats>* step_log = nullptr);

/// Scores all items for one user from a pooled embedding table.
Vector score_all_items(const Matrix& pooled, Index num_users, Index user);

}  // namespace hgcl
