#include "hgcl/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hgcl/adam.hpp"
#include "hgcl/losses.hpp"

namespace hgcl {

void TrainConfig::validate() const {
  if (d < 1) throw std::invalid_argument("TrainConfig.d must be >= 1");
  if (K < 1) throw std::invalid_argument("TrainConfig.K must be >= 1");
  if (K_star < 0 || K_star > K) {
    throw std::invalid_argument("TrainConfig.K_star must lie in [0, K]");
  }
  if (lambda < 0.0) throw std::invalid_argument("TrainConfig.lambda must be >= 0");
  if (epsilon < 0.0) throw std::invalid_argument("TrainConfig.epsilon must be >= 0");
  if (tau <= 0.0) throw std::invalid_argument("TrainConfig.tau must be > 0");
  if (lr <= 0.0) throw std::invalid_argument("TrainConfig.lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig.batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("TrainConfig.epochs must be >= 1");
  if (l2_coeff < 0.0) throw std::invalid_argument("TrainConfig.l2_coeff must be >= 0");
  if (patience < 0) throw std::invalid_argument("TrainConfig.patience must be >= 0");
  if (eval_k < 1) throw std::invalid_argument("TrainConfig.eval_k must be >= 1");
}

std::vector<std::vector<Index>> epoch_schedule(Index edge_count,
                                               Index batch_size, Rng& rng) {
  if (edge_count < 1) throw std::invalid_argument("epoch_schedule: no edges");
  if (batch_size < 1) throw std::invalid_argument("epoch_schedule: batch_size < 1");
  std::vector<Index> order(static_cast<std::size_t>(edge_count));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  std::vector<std::vector<Index>> batches;
  batches.reserve(static_cast<std::size_t>((edge_count + batch_size - 1) / batch_size));
  for (Index lo = 0; lo < edge_count; lo += batch_size) {
    const Index hi = std::min(edge_count, lo + batch_size);
    batches.emplace_back(order.begin() + lo, order.begin() + hi);
  }
  return batches;
}

Vector score_all_items(const Matrix& pooled, Index num_users, Index user) {
  const Index num_items = pooled.rows() - num_users;
  return pooled.bottomRows(num_items) * pooled.row(user).transpose();
}

PretrainResult pretrain(const BipartiteGraph& g, const TrainConfig& cfg,
                        const TestSet* validation, const EpochHook& hook,
                        std::vector<StepStats>* step_log) {
  cfg.validate();
  if (g.edge_count == 0) throw std::invalid_argument("pretrain: empty graph");

  const NormalizedAdjacency adj = normalize_adjacency(g);
  const Index m = g.num_users;
  const Index nodes = adj.nodes();

  Rng rng_init(derive_seed(cfg.seed, "init"));
  Rng rng_epoch(derive_seed(cfg.seed, "epoch"));
  Rng rng_neg(derive_seed(cfg.seed, "neg"));
  Rng rng_noise(derive_seed(cfg.seed, "noise"));

  Matrix e0 = xavier_init(nodes, cfg.d, rng_init);
  AdamState adam = make_adam_state(nodes, cfg.d, cfg.lr);
  const NoiseSpec noise{cfg.epsilon, cfg.epsilon > 0.0};

  PretrainResult result;
  Scalar best_recall = -1.0;
  int stale_epochs = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = epoch_schedule(g.edge_count, cfg.batch_size, rng_epoch);
    EpochStats es;
    es.epoch = epoch;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto triples = triples_for_edges(g, batches[b], rng_neg);

      EmbeddingState state = propagate(adj, e0, cfg.K, noise, rng_noise);
      auto [bpr_value, pooled_grad] = bpr_pooled_grads(triples, state.pooled, m);

      Scalar cl_value = 0.0;
      InfoNceResult cl_users, cl_items;
      std::vector<LayerGrad> directs;
      RowGradients direct_k, direct_kstar;
      if (cfg.lambda > 0.0) {
        std::vector<Index> user_rows, item_rows;
        user_rows.reserve(triples.size());
        item_rows.reserve(triples.size());
        for (const auto& t : triples) {
          user_rows.push_back(t.user);
          item_rows.push_back(m + t.pos);
        }
        cl_users = cross_layer_infonce(state.layers[static_cast<std::size_t>(cfg.K)],
                                       state.layers[static_cast<std::size_t>(cfg.K_star)],
                                       user_rows, cfg.tau);
        cl_items = cross_layer_infonce(state.layers[static_cast<std::size_t>(cfg.K)],
                                       state.layers[static_cast<std::size_t>(cfg.K_star)],
                                       item_rows, cfg.tau);
        cl_value = cl_users.value + cl_items.value;

        direct_k = merge_gradients(cl_users.grad_view_k, cl_items.grad_view_k);
        direct_kstar =
            merge_gradients(cl_users.grad_view_kstar, cl_items.grad_view_kstar);
        direct_k.rows *= cfg.lambda;
        direct_kstar.rows *= cfg.lambda;
        if (cfg.K_star == cfg.K) {
          direct_k = merge_gradients(direct_k, direct_kstar);
          directs.push_back({cfg.K, &direct_k});
        } else {
          directs.push_back({cfg.K, &direct_k});
          directs.push_back({cfg.K_star, &direct_kstar});
        }
      }

      Matrix dense = chain_backprop(adj, cfg.K, pooled_grad, directs);

      std::vector<Index> reg_rows;
      reg_rows.reserve(triples.size() * 3);
      for (const auto& t : triples) {
        reg_rows.push_back(t.user);
        reg_rows.push_back(m + t.pos);
        reg_rows.push_back(m + t.neg);
      }
      const LossValue reg = l2_reg(e0, reg_rows, cfg.l2_coeff);
      reg.grads.scatter_into(dense);

      const Scalar total = bpr_value + cfg.lambda * cl_value + reg.value;
      if (!std::isfinite(total)) {
        throw std::runtime_error(
            "pretrain: non-finite loss at epoch " + std::to_string(epoch) +
            " step " + std::to_string(b) + " (bpr=" + std::to_string(bpr_value) +
            ", infonce=" + std::to_string(cl_value) +
            ", l2=" + std::to_string(reg.value) + ")");
      }

      const RowGradients grads = compress_gradients(dense);
      adam_step(e0, grads, adam);

      es.bpr += bpr_value;
      es.infonce += cl_value;
      es.l2 += reg.value;
      es.total += total;
      if (step_log) {
        step_log->push_back({epoch, static_cast<Index>(b), bpr_value, cl_value,
                             reg.value, total});
      }
    }

    if (validation) {
      const EmbeddingState eval_state = propagate(adj, e0, cfg.K, {});
      const ScoreFn scorer = [&](Index u) {
        return score_all_items(eval_state.pooled, m, u);
      };
      const EvalReport rep = evaluate(scorer, g, *validation, cfg.eval_k);
      es.val_recall = rep.recall;
      es.val_ndcg = rep.ndcg;
      if (rep.recall > best_recall) {
        best_recall = rep.recall;
        es.improved = true;
        result.e0 = e0;
        result.best_epoch = epoch;
        stale_epochs = 0;
      } else {
        ++stale_epochs;
      }
    }

    result.history.push_back(es);
    if (hook) hook(es);
    if (validation && cfg.patience > 0 && stale_epochs >= cfg.patience) break;
  }

  if (!validation || result.e0.size() == 0) {
    result.e0 = e0;
    result.best_epoch = result.history.empty()
                            ? 0
                            : result.history.back().epoch;
  }
  result.state = propagate(adj, result.e0, cfg.K, {});
  return result;
}

}  // namespace hgcl
