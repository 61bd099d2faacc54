#include "hgcl/finetune.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hgcl/adam.hpp"
#include "hgcl/losses.hpp"

namespace hgcl {

HgclModel init_finetune(const EmbeddingState& pretrained,
                        const ClusterAssignment& a, Rng& rng) {
  const Index n = static_cast<Index>(a.assign.size());
  const Index m = pretrained.e0.rows() - n;
  if (m <= 0 || pretrained.pooled.rows() != pretrained.e0.rows()) {
    throw std::invalid_argument(
        "init_finetune: pre-trained state does not cover the assignment's "
        "item count");
  }
  const Index d = pretrained.e0.cols();
  const Index c = a.num_clusters();

  HgclModel model;
  model.assignment = a;
  model.e_user = pretrained.e0.topRows(m);
  model.e_item = pretrained.e0.bottomRows(n);
  model.e_cluster = xavier_init(c, d, rng);  // survives only in empty rows

  Matrix sums = Matrix::Zero(c, d);
  for (Index j = 0; j < n; ++j) {
    sums.row(a.assign[static_cast<std::size_t>(j)]) +=
        pretrained.pooled.row(m + j);
  }
  for (Index k = 0; k < c; ++k) {
    const Index size = a.sizes[static_cast<std::size_t>(k)];
    if (size > 0) model.e_cluster.row(k) = sums.row(k) / static_cast<Scalar>(size);
  }
  return model;
}

void refresh_pooled(HgclModel& model, const NormalizedAdjacency& base_adj,
                    const HierarchyGraph& h, int K) {
  const Index m = model.num_users();
  Matrix e0_ui(m + model.num_items(), model.dim());
  e0_ui.topRows(m) = model.e_user;
  e0_ui.bottomRows(model.num_items()) = model.e_item;
  const EmbeddingState ui = propagate(base_adj, e0_ui, K, {});
  model.pooled_user = ui.pooled.topRows(m);
  model.pooled_item = ui.pooled.bottomRows(model.num_items());

  Matrix e0_uc(m + model.num_clusters(), model.dim());
  e0_uc.topRows(m) = model.e_user;
  e0_uc.bottomRows(model.num_clusters()) = model.e_cluster;
  const EmbeddingState uc = propagate(h.adj, e0_uc, K, {});
  model.pooled_cluster = uc.pooled.bottomRows(model.num_clusters());
}

Scalar predict_score(const HgclModel& model, Index user, Index item) {
  if (user < 0 || user >= model.pooled_user.rows()) {
    throw std::out_of_range("predict_score: user " + std::to_string(user));
  }
  if (item < 0 || item >= model.pooled_item.rows()) {
    throw std::out_of_range("predict_score: item " + std::to_string(item));
  }
  const Index k = model.assignment.assign[static_cast<std::size_t>(item)];
  return model.pooled_user.row(user).dot(model.pooled_item.row(item) +
                                         model.pooled_cluster.row(k));
}

Matrix augmented_item_matrix(const HgclModel& model) {
  Matrix aug = model.pooled_item;
  for (Index j = 0; j < aug.rows(); ++j) {
    aug.row(j) +=
        model.pooled_cluster.row(model.assignment.assign[static_cast<std::size_t>(j)]);
  }
  return aug;
}

Vector finetune_scores(const HgclModel& model, Index user) {
  return augmented_item_matrix(model) * model.pooled_user.row(user).transpose();
}

FinetuneResult finetune(const BipartiteGraph& g, const HierarchyGraph& h,
                        const HgclModel& warm, const TrainConfig& cfg,
                        const TestSet* validation, const FinetuneHook& hook,
                        std::vector<FinetuneStepStats>* step_log) {
  cfg.validate();
  if (g.edge_count == 0) throw std::invalid_argument("finetune: empty graph");
  if (warm.num_users() != g.num_users || warm.num_items() != g.num_items ||
      warm.num_clusters() != h.graph.num_items) {
    throw std::invalid_argument("finetune: model blocks do not match graphs");
  }
  const NormalizedAdjacency base_adj = normalize_adjacency(g);
  const Index m = g.num_users;
  const Index n = g.num_items;
  const Index c = h.graph.num_items;
  const Index d = warm.dim();

  Rng rng_epoch(derive_seed(cfg.seed, "ft-epoch"));
  Rng rng_neg_ui(derive_seed(cfg.seed, "ft-neg-ui"));
  Rng rng_batch_uc(derive_seed(cfg.seed, "ft-batch-uc"));
  Rng rng_noise(derive_seed(cfg.seed, "ft-noise"));

  HgclModel model = warm;
  AdamState adam_user = make_adam_state(m, d, cfg.lr);
  AdamState adam_item = make_adam_state(n, d, cfg.lr);
  AdamState adam_cluster = make_adam_state(c, d, cfg.lr);
  const NoiseSpec noise{cfg.epsilon, cfg.epsilon > 0.0};

  FinetuneResult result;
  Scalar best_recall = -1.0;
  int stale_epochs = 0;
  Matrix best_user, best_item, best_cluster;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = epoch_schedule(g.edge_count, cfg.batch_size, rng_epoch);
    FinetuneEpochStats es;
    es.epoch = epoch;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto ui_triples = triples_for_edges(g, batches[b], rng_neg_ui);
      const auto uc_triples = sample_bpr_triples(
          h.graph, static_cast<Index>(ui_triples.size()), rng_batch_uc);

      // Base-graph path: perturbed forward, BPR + cross-layer contrast.
      Matrix e0_ui(m + n, d);
      e0_ui.topRows(m) = model.e_user;
      e0_ui.bottomRows(n) = model.e_item;
      EmbeddingState ui = propagate(base_adj, e0_ui, cfg.K, noise, rng_noise);
      auto [bpr_ui, pooled_grad_ui] = bpr_pooled_grads(ui_triples, ui.pooled, m);

      Scalar cl_value = 0.0;
      std::vector<LayerGrad> directs;
      RowGradients direct_k, direct_kstar;
      if (cfg.lambda > 0.0) {
        std::vector<Index> user_rows, item_rows;
        user_rows.reserve(ui_triples.size());
        item_rows.reserve(ui_triples.size());
        for (const auto& t : ui_triples) {
          user_rows.push_back(t.user);
          item_rows.push_back(m + t.pos);
        }
        const auto& vk = ui.layers[static_cast<std::size_t>(cfg.K)];
        const auto& vks = ui.layers[static_cast<std::size_t>(cfg.K_star)];
        InfoNceResult cl_users = cross_layer_infonce(vk, vks, user_rows, cfg.tau);
        InfoNceResult cl_items = cross_layer_infonce(vk, vks, item_rows, cfg.tau);
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
      Matrix dense_ui = chain_backprop(base_adj, cfg.K, pooled_grad_ui, directs);

      // Hierarchy path: plain forward, BPR only.
      Matrix e0_uc(m + c, d);
      e0_uc.topRows(m) = model.e_user;
      e0_uc.bottomRows(c) = model.e_cluster;
      EmbeddingState uc = propagate(h.adj, e0_uc, cfg.K, {});
      auto [bpr_uc, pooled_grad_uc] = bpr_pooled_grads(uc_triples, uc.pooled, m);
      Matrix dense_uc = chain_backprop(h.adj, cfg.K, pooled_grad_uc, {});

      // L2 on every layer-0 row touched by either batch.
      std::vector<Index> reg_ui, reg_uc;
      reg_ui.reserve(ui_triples.size() * 3);
      for (const auto& t : ui_triples) {
        reg_ui.push_back(t.user);
        reg_ui.push_back(m + t.pos);
        reg_ui.push_back(m + t.neg);
      }
      reg_uc.reserve(uc_triples.size() * 3);
      for (const auto& t : uc_triples) {
        reg_uc.push_back(t.user);
        reg_uc.push_back(m + t.pos);
        reg_uc.push_back(m + t.neg);
      }
      const LossValue l2_ui = l2_reg(e0_ui, reg_ui, cfg.l2_coeff);
      const LossValue l2_uc = l2_reg(e0_uc, reg_uc, cfg.l2_coeff);
      l2_ui.grads.scatter_into(dense_ui);
      l2_uc.grads.scatter_into(dense_uc);
      const Scalar l2_value = l2_ui.value + l2_uc.value;

      const Scalar total = bpr_ui + bpr_uc + cfg.lambda * cl_value + l2_value;
      if (!std::isfinite(total)) {
        throw std::runtime_error(
            "finetune: non-finite loss at epoch " + std::to_string(epoch) +
            " step " + std::to_string(b) + " (bpr_ui=" + std::to_string(bpr_ui) +
            ", bpr_uc=" + std::to_string(bpr_uc) +
            ", infonce=" + std::to_string(cl_value) +
            ", l2=" + std::to_string(l2_value) + ")");
      }

      // Shared user block: sum contributions from both paths.
      Matrix grad_user = dense_ui.topRows(m) + dense_uc.topRows(m);
      adam_step(model.e_user, compress_gradients(grad_user), adam_user);
      adam_step(model.e_item, compress_gradients(dense_ui.bottomRows(n)),
                adam_item);
      adam_step(model.e_cluster, compress_gradients(dense_uc.bottomRows(c)),
                adam_cluster);

      es.bpr_ui += bpr_ui;
      es.bpr_uc += bpr_uc;
      es.infonce += cl_value;
      es.l2 += l2_value;
      es.total += total;
      if (step_log) {
        step_log->push_back({epoch, static_cast<Index>(b), bpr_ui, bpr_uc,
                             cl_value, l2_value, total});
      }
    }

    if (validation) {
      refresh_pooled(model, base_adj, h, cfg.K);
      const ScoreFn scorer = [&](Index u) { return finetune_scores(model, u); };
      const EvalReport rep = evaluate(scorer, g, *validation, cfg.eval_k);
      es.val_recall = rep.recall;
      es.val_ndcg = rep.ndcg;
      if (rep.recall > best_recall) {
        best_recall = rep.recall;
        es.improved = true;
        best_user = model.e_user;
        best_item = model.e_item;
        best_cluster = model.e_cluster;
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

  result.model = std::move(model);
  if (validation && best_user.size() != 0) {
    result.model.e_user = std::move(best_user);
    result.model.e_item = std::move(best_item);
    result.model.e_cluster = std::move(best_cluster);
  } else {
    result.best_epoch = result.history.empty() ? 0 : result.history.back().epoch;
  }
  refresh_pooled(result.model, base_adj, h, cfg.K);
  return result;
}

}  // namespace hgcl
