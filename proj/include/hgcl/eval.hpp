#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hgcl/dataset.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/rng.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Held-out interactions bucketed by user id (training id space).
struct TestSet {
  std::vector<std::vector<Index>> items_by_user;
  Index total = 0;
  Index dropped = 0;  // carried over from the loader

  bool empty() const { return total == 0; }
};

TestSet make_test_set(const InteractionDataset& ds, Index num_users);

TestSet make_test_set(std::span<const std::pair<Index, Index>> interactions,
                      Index num_users);

/// Scores for every item, for one user.
using ScoreFn = std::function<Vector(Index user)>;

/// Top-k item ids by descending score, ties broken by ascending id;
/// `exclude` (sorted) is removed from the candidate pool first.
std::vector<Index> rank_items(const Vector& scores,
                              std::span<const Index> exclude, Index k);

/// |topk intersect relevant| / |relevant|.
Scalar recall_at_k(std::span<const Index> topk,
                   std::span<const Index> relevant);

/// Binary-relevance NDCG: DCG over hit ranks, ideal DCG over
/// min(|relevant|, k) slots.
Scalar ndcg_at_k(std::span<const Index> topk, std::span<const Index> relevant,
                 Index k);

struct PerUserMetrics {
  Index user;
  Scalar recall;
  Scalar ndcg;
};

struct EvalReport {
  Scalar recall = 0.0;
  Scalar ndcg = 0.0;
  Index k = 0;
  Index users_evaluated = 0;
  Index users_skipped = 0;  // no surviving test items
  std::vector<PerUserMetrics> per_user;
};

/// Full-ranking evaluation: per user with >= 1 test item, rank all items
/// excluding the user's training interactions and average Recall@k / NDCG@k.
/// `threads` > 1 parallelizes across users with a fixed aggregation order.
EvalReport evaluate(const ScoreFn& scorer, const BipartiteGraph& train,
                    const TestSet& test, Index k, int threads = 1,
                    bool keep_per_user = false);

/// Mean and histogram of connecting strengths for one pair population.
struct StrengthSeries {
  Scalar mean = 0.0;
  Index count = 0;
  std::vector<Scalar> bin_edges;  // size bins+1
  std::vector<Index> bin_counts;
};

struct StrengthStats {
  StrengthSeries train_pos;
  StrengthSeries train_neg;
  StrengthSeries test_pos;
  StrengthSeries test_neg;
};

/// Positive pairs come from the train/test edge sets; negatives sample
/// `neg_per_user` items uniformly from the whole item set for every user
/// appearing in the respective split.
StrengthStats strength_stats(const ScoreFn& scorer,
                             const BipartiteGraph& train, const TestSet& test,
                             int neg_per_user, Rng& rng, int bins = 60);

}  // namespace hgcl
