#pragma once

#include <functional>
#include <vector>

#include "hgcl/embedding.hpp"
#include "hgcl/eval.hpp"
#include "hgcl/hierarchy.hpp"
#include "hgcl/polar.hpp"
#include "hgcl/train.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Joint model over users, items, and clustered items. The layer-0 blocks
/// are the learnable parameters; pooled blocks come from noise-free forwards
/// (users and items through the base graph, clusters through the hierarchy
/// graph) and must be refreshed before scoring.
struct HgclModel {
  Matrix e_user;     // m x d
  Matrix e_item;     // n x d
  Matrix e_cluster;  // rho*theta x d
  Matrix pooled_user;
  Matrix pooled_item;
  Matrix pooled_cluster;
  ClusterAssignment assignment;

  Index num_users() const { return e_user.rows(); }
  Index num_items() const { return e_item.rows(); }
  Index num_clusters() const { return e_cluster.rows(); }
  Index dim() const { return e_user.cols(); }
};

/// Warm start: user/item blocks copy the pre-trained layer-0 parameters;
/// each cluster row is the mean of its member items' pre-trained pooled
/// rows, with a Xavier row for empty clusters.
HgclModel init_finetune(const EmbeddingState& pretrained,
                        const ClusterAssignment& a, Rng& rng);

/// Recompute the pooled blocks from the current layer-0 parameters.
void refresh_pooled(HgclModel& model, const NormalizedAdjacency& base_adj,
                    const HierarchyGraph& h, int K);

/// e_u . (e_i + e_{cluster(i)}) on pooled blocks; the one-hot membership
/// collapses the cluster sum to a single row.
Scalar predict_score(const HgclModel& model, Index user, Index item);

/// Items-plus-their-cluster rows, so scoring a user is one matrix product.
Matrix augmented_item_matrix(const HgclModel& model);

/// All-item scores for one user from the pooled blocks.
Vector finetune_scores(const HgclModel& model, Index user);

struct FinetuneStepStats {
  int epoch = 0;
  Index step = 0;
  Scalar bpr_ui = 0.0;
  Scalar bpr_uc = 0.0;
  Scalar infonce = 0.0;  // unweighted
  Scalar l2 = 0.0;
  Scalar total = 0.0;  // bpr_ui + bpr_uc + lambda * infonce + l2
};

struct FinetuneEpochStats {
  int epoch = 0;
  Scalar bpr_ui = 0.0;
  Scalar bpr_uc = 0.0;
  Scalar infonce = 0.0;
  Scalar l2 = 0.0;
  Scalar total = 0.0;
  Scalar val_recall = -1.0;
  Scalar val_ndcg = -1.0;
  bool improved = false;
};

using FinetuneHook = std::function<void(const FinetuneEpochStats&)>;

struct FinetuneResult {
  HgclModel model;  // selected parameters, pooled blocks refreshed
  int best_epoch = 0;
  std::vector<FinetuneEpochStats> history;
};

/// Stage-3 joint training: per step one noise-perturbed forward on the base
/// graph (BPR + cross-layer InfoNCE, as in pre-training) and one noise-free
/// forward on the hierarchy graph (BPR only); the shared user block sums
/// gradients from both paths; three Adam tables step in lockstep. Hierarchy
/// negatives are clusters sampled with rejection, so a user connected to
/// every cluster raises the sampler error (rho*theta >= 2 is required).
FinetuneResult finetune(const BipartiteGraph& g, const HierarchyGraph& h,
                        const HgclModel& warm, const TrainConfig& cfg,
                        const TestSet* validation = nullptr,
                        const FinetuneHook& hook = {},
                        std::vector<FinetuneStepStats>* step_log = nullptr);

}  // namespace hgcl
