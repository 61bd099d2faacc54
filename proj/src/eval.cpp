#include "hgcl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace hgcl {

TestSet make_test_set(std::span<const std::pair<Index, Index>> interactions,
                      Index num_users) {
  TestSet out;
  out.items_by_user.assign(static_cast<std::size_t>(num_users), {});
  for (const auto& [u, i] : interactions) {
    if (u < 0 || u >= num_users) {
      throw std::out_of_range("test interaction references unknown user id " +
                              std::to_string(u));
    }
    out.items_by_user[static_cast<std::size_t>(u)].push_back(i);
    ++out.total;
  }
  for (auto& items : out.items_by_user) {
    std::sort(items.begin(), items.end());
  }
  return out;
}

TestSet make_test_set(const InteractionDataset& ds, Index num_users) {
  TestSet out = make_test_set(std::span(ds.interactions), num_users);
  out.dropped = ds.dropped;
  return out;
}

std::vector<Index> rank_items(const Vector& scores,
                              std::span<const Index> exclude, Index k) {
  const Index n = scores.size();
  std::vector<Index> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (!std::binary_search(exclude.begin(), exclude.end(), i)) {
      candidates.push_back(i);
    }
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(k, 0)),
                                        candidates.size());
  auto better = [&scores](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(kk),
                    candidates.end(), better);
  candidates.resize(kk);
  return candidates;
}

Scalar recall_at_k(std::span<const Index> topk,
                   std::span<const Index> relevant) {
  if (relevant.empty()) return 0.0;
  Index hits = 0;
  for (Index item : topk) {
    if (std::binary_search(relevant.begin(), relevant.end(), item)) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(relevant.size());
}

Scalar ndcg_at_k(std::span<const Index> topk, std::span<const Index> relevant,
                 Index k) {
  if (relevant.empty() || k <= 0) return 0.0;
  Scalar dcg = 0.0;
  const auto limit = std::min<std::size_t>(topk.size(),
                                           static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < limit; ++p) {
    if (std::binary_search(relevant.begin(), relevant.end(), topk[p])) {
      dcg += 1.0 / std::log2(static_cast<Scalar>(p) + 2.0);
    }
  }
  const auto ideal = std::min<std::size_t>(relevant.size(),
                                           static_cast<std::size_t>(k));
  Scalar idcg = 0.0;
  for (std::size_t p = 0; p < ideal; ++p) {
    idcg += 1.0 / std::log2(static_cast<Scalar>(p) + 2.0);
  }
  return dcg / idcg;
}

EvalReport evaluate(const ScoreFn& scorer, const BipartiteGraph& train,
                    const TestSet& test, Index k, int threads,
                    bool keep_per_user) {
  if (test.items_by_user.size() != static_cast<std::size_t>(train.num_users)) {
    throw std::invalid_argument("test set sized for a different user count");
  }
  if (test.empty()) {
    throw std::invalid_argument("evaluate: empty test set");
  }
  std::vector<Index> users;
  for (Index u = 0; u < train.num_users; ++u) {
    if (!test.items_by_user[static_cast<std::size_t>(u)].empty()) {
      users.push_back(u);
    }
  }

  EvalReport report;
  report.k = k;
  report.users_skipped = train.num_users - static_cast<Index>(users.size());
  report.users_evaluated = static_cast<Index>(users.size());
  if (users.empty()) return report;

  std::vector<PerUserMetrics> metrics(users.size());
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      const Index u = users[idx];
      const Vector scores = scorer(u);
      if (scores.size() != train.num_items) {
        throw std::runtime_error("scorer returned " +
                                 std::to_string(scores.size()) +
                                 " scores for " +
                                 std::to_string(train.num_items) + " items");
      }
      const auto seen = train.user_to_items.row(u);
      const auto topk = rank_items(scores, seen, k);
      const auto& relevant = test.items_by_user[static_cast<std::size_t>(u)];
      metrics[idx].user = u;
      metrics[idx].recall = recall_at_k(topk, relevant);
      metrics[idx].ndcg = ndcg_at_k(topk, relevant, k);
    }
  };

  const int workers = std::max(1, std::min<int>(threads,
      static_cast<int>(users.size())));
  if (workers == 1) {
    run_range(0, users.size());
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (users.size() + static_cast<std::size_t>(workers) - 1) /
                              static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(users.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  // Reduce sequentially in user order so results do not depend on the
  // thread count.
  Scalar recall_sum = 0.0;
  Scalar ndcg_sum = 0.0;
  for (const auto& m : metrics) {
    recall_sum += m.recall;
    ndcg_sum += m.ndcg;
  }
  report.recall = recall_sum / static_cast<Scalar>(users.size());
  report.ndcg = ndcg_sum / static_cast<Scalar>(users.size());
  if (keep_per_user) report.per_user = std::move(metrics);
  return report;
}

namespace {

StrengthSeries make_series(const std::vector<Scalar>& values, int bins) {
  StrengthSeries s;
  s.count = static_cast<Index>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<Scalar>(values.size());
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  Scalar lo = *mn_it;
  Scalar hi = *mx_it;
  if (lo == hi) hi = lo + 1.0;  // degenerate spread: one occupied bin
  const Scalar width = (hi - lo) / static_cast<Scalar>(bins);
  s.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    s.bin_edges[static_cast<std::size_t>(b)] = lo + width * static_cast<Scalar>(b);
  }
  s.bin_counts.assign(static_cast<std::size_t>(bins), 0);
  for (Scalar v : values) {
    auto b = static_cast<std::ptrdiff_t>((v - lo) / width);
    b = std::clamp<std::ptrdiff_t>(b, 0, bins - 1);
    ++s.bin_counts[static_cast<std::size_t>(b)];
  }
  return s;
}

}  // namespace

StrengthStats strength_stats(const ScoreFn& scorer,
                             const BipartiteGraph& train, const TestSet& test,
                             int neg_per_user, Rng& rng, int bins) {
  if (neg_per_user < 0) throw std::invalid_argument("neg_per_user < 0");
  std::vector<Scalar> train_pos, train_neg, test_pos, test_neg;
  for (Index u = 0; u < train.num_users; ++u) {
    const auto seen = train.user_to_items.row(u);
    const auto& held = test.items_by_user[static_cast<std::size_t>(u)];
    if (seen.empty() && held.empty()) continue;
    const Vector scores = scorer(u);
    for (Index i : seen) train_pos.push_back(scores[i]);
    for (Index i : held) test_pos.push_back(scores[i]);
    if (!seen.empty()) {
      for (int s = 0; s < neg_per_user; ++s) {
        train_neg.push_back(scores[static_cast<Index>(
            rng.bounded(static_cast<uint64_t>(train.num_items)))]);
      }
    }
    if (!held.empty()) {
      for (int s = 0; s < neg_per_user; ++s) {
        test_neg.push_back(scores[static_cast<Index>(
            rng.bounded(static_cast<uint64_t>(train.num_items)))]);
      }
    }
  }
  StrengthStats out;
  out.train_pos = make_series(train_pos, bins);
  out.train_neg = make_series(train_neg, bins);
  out.test_pos = make_series(test_pos, bins);
  out.test_neg = make_series(test_neg, bins);
  return out;
}

}  // namespace hgcl
