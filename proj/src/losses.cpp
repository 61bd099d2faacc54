#include "hgcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>

namespace hgcl {

void RowGradients::scatter_into(Matrix& dense) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    dense.row(ids[i]) += rows.row(static_cast<Index>(i));
  }
}

RowGradients compress_gradients(const Matrix& dense) {
  RowGradients out;
  for (Index r = 0; r < dense.rows(); ++r) {
    if (!dense.row(r).isZero(0.0)) out.ids.push_back(r);
  }
  out.rows.resize(static_cast<Index>(out.ids.size()), dense.cols());
  for (std::size_t i = 0; i < out.ids.size(); ++i) {
    out.rows.row(static_cast<Index>(i)) = dense.row(out.ids[i]);
  }
  return out;
}

RowGradients merge_gradients(const RowGradients& a, const RowGradients& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  std::vector<Index> ids;
  ids.reserve(a.ids.size() + b.ids.size());
  std::merge(a.ids.begin(), a.ids.end(), b.ids.begin(), b.ids.end(),
             std::back_inserter(ids));
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  RowGradients out;
  out.ids = std::move(ids);
  out.rows = Matrix::Zero(static_cast<Index>(out.ids.size()), a.rows.cols());
  std::size_t i = 0, j = 0;
  for (std::size_t r = 0; r < out.ids.size(); ++r) {
    if (i < a.ids.size() && a.ids[i] == out.ids[r]) {
      out.rows.row(static_cast<Index>(r)) += a.rows.row(static_cast<Index>(i));
      ++i;
    }
    if (j < b.ids.size() && b.ids[j] == out.ids[r]) {
      out.rows.row(static_cast<Index>(r)) += b.rows.row(static_cast<Index>(j));
      ++j;
    }
  }
  return out;
}

namespace {

// Sorted unique id list -> slot lookup for accumulation.
struct SlotMap {
  std::vector<Index> ids;

  explicit SlotMap(std::vector<Index> raw) : ids(std::move(raw)) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }

  Index slot(Index id) const {
    return static_cast<Index>(
        std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  }
};

}  // namespace

Scalar bpr_loss(std::span<const Scalar> pos, std::span<const Scalar> neg) {
  if (pos.size() != neg.size()) {
    throw std::invalid_argument("bpr_loss: score lists differ in length");
  }
  Scalar total = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    total += softplus(neg[i] - pos[i]);  // -log sigmoid(pos - neg)
  }
  return total;
}

std::pair<Scalar, RowGradients> bpr_pooled_grads(
    std::span<const BprTriple> triples, const Matrix& pooled,
    Index num_users) {
  std::vector<Index> touched;
  touched.reserve(triples.size() * 3);
  for (const auto& t : triples) {
    touched.push_back(t.user);
    touched.push_back(num_users + t.pos);
    touched.push_back(num_users + t.neg);
  }
  SlotMap slots(std::move(touched));

  RowGradients grads;
  grads.ids = slots.ids;
  grads.rows = Matrix::Zero(static_cast<Index>(slots.ids.size()),
                            pooled.cols());

  Scalar value = 0.0;
  for (const auto& t : triples) {
    const auto eu = pooled.row(t.user);
    const auto ep = pooled.row(num_users + t.pos);
    const auto en = pooled.row(num_users + t.neg);
    const Scalar diff = eu.dot(ep) - eu.dot(en);
    value += softplus(-diff);
    const Scalar g = -stable_sigmoid(-diff);  // dloss/ddiff
    grads.rows.row(slots.slot(t.user)) += g * (ep - en);
    grads.rows.row(slots.slot(num_users + t.pos)) += g * eu;
    grads.rows.row(slots.slot(num_users + t.neg)) -= g * eu;
  }
  return {value, std::move(grads)};
}

Matrix chain_backprop(const NormalizedAdjacency& adj, int K,
                      const RowGradients& pooled_grad,
                      std::span<const LayerGrad> layer_grads) {
  const Index rows = adj.nodes();
  const Index d = !pooled_grad.empty()
                      ? pooled_grad.rows.cols()
                      : (layer_grads.empty() ? 0
                                             : layer_grads[0].grads->rows.cols());
  Matrix acc = Matrix::Zero(rows, d);
  const Scalar pool_coeff = 1.0 / static_cast<Scalar>(K + 1);

  for (int k = K; k >= 0; --k) {
    if (!pooled_grad.empty()) {
      for (std::size_t i = 0; i < pooled_grad.ids.size(); ++i) {
        acc.row(pooled_grad.ids[i]) +=
            pool_coeff * pooled_grad.rows.row(static_cast<Index>(i));
      }
    }
    for (const auto& lg : layer_grads) {
      if (lg.layer == k && !lg.grads->empty()) lg.grads->scatter_into(acc);
    }
    if (k > 0) acc = apply_adjacency(adj, acc);  // A_hat is symmetric
  }
  return acc;
}

LossValue bpr_grad(std::span<const BprTriple> triples,
                   const EmbeddingState& state,
                   const NormalizedAdjacency& adj) {
  if (state.layers.empty() || state.pooled.rows() == 0) {
    throw std::runtime_error("bpr_grad: forward state not populated");
  }
  auto [value, pooled_grads] =
      bpr_pooled_grads(triples, state.pooled, adj.num_users);
  Matrix dense =
      chain_backprop(adj, state.num_layers(), pooled_grads, {});
  return {value, compress_gradients(dense)};
}

InfoNceResult cross_layer_infonce(const Matrix& e_k, const Matrix& e_kstar,
                                  std::span<const Index> batch, Scalar tau) {
  if (e_k.rows() != e_kstar.rows() || e_k.cols() != e_kstar.cols()) {
    throw std::invalid_argument("cross_layer_infonce: view shapes differ");
  }
  if (tau <= 0.0) {
    throw std::invalid_argument("cross_layer_infonce: tau must be > 0");
  }
  if (batch.empty()) {
    throw std::invalid_argument("cross_layer_infonce: empty batch");
  }

  const Index b = static_cast<Index>(batch.size());
  const Index d = e_k.cols();
  constexpr Scalar kMinNorm = std::numeric_limits<Scalar>::min();

  // Normalized batch views and their norms.
  Matrix an(b, d), bn(b, d);
  Vector na(b), nb(b);
  for (Index i = 0; i < b; ++i) {
    const Index id = batch[static_cast<std::size_t>(i)];
    na(i) = e_k.row(id).norm();
    nb(i) = e_kstar.row(id).norm();
    if (na(i) < kMinNorm || nb(i) < kMinNorm) {
      throw std::invalid_argument(
          "cross_layer_infonce: zero-norm row in batch, cosine undefined");
    }
    an.row(i) = e_k.row(id) / na(i);
    bn.row(i) = e_kstar.row(id) / nb(i);
  }

  Matrix sims = an * bn.transpose();  // cosine, b x b

  Scalar value = 0.0;
  Matrix dsim(b, b);  // dL/dsims
  for (Index i = 0; i < b; ++i) {
    const Scalar zmax = sims.row(i).maxCoeff() / tau;
    Scalar denom = 0.0;
    for (Index j = 0; j < b; ++j) {
      denom += std::exp(sims(i, j) / tau - zmax);
    }
    value += zmax + std::log(denom) - sims(i, i) / tau;
    for (Index j = 0; j < b; ++j) {
      const Scalar p = std::exp(sims(i, j) / tau - zmax) / denom;
      dsim(i, j) = (p - (i == j ? 1.0 : 0.0)) / tau;
    }
  }

  // Through the cosine: grad wrt a_i = (g - (an.g) an) / ||a||.
  Matrix ga = dsim * bn;              // wrt normalized an rows
  Matrix gb = dsim.transpose() * an;  // wrt normalized bn rows
  Matrix grad_a(b, d), grad_b(b, d);
  for (Index i = 0; i < b; ++i) {
    grad_a.row(i) =
        (ga.row(i) - ga.row(i).dot(an.row(i)) * an.row(i)) / na(i);
    grad_b.row(i) =
        (gb.row(i) - gb.row(i).dot(bn.row(i)) * bn.row(i)) / nb(i);
  }

  // Scatter batch positions back to unique node ids.
  SlotMap slots(std::vector<Index>(batch.begin(), batch.end()));
  InfoNceResult out;
  out.value = value;
  out.grad_view_k.ids = slots.ids;
  out.grad_view_kstar.ids = slots.ids;
  out.grad_view_k.rows =
      Matrix::Zero(static_cast<Index>(slots.ids.size()), d);
  out.grad_view_kstar.rows =
      Matrix::Zero(static_cast<Index>(slots.ids.size()), d);
  for (Index i = 0; i < b; ++i) {
    const Index s = slots.slot(batch[static_cast<std::size_t>(i)]);
    out.grad_view_k.rows.row(s) += grad_a.row(i);
    out.grad_view_kstar.rows.row(s) += grad_b.row(i);
  }
  return out;
}

LossValue l2_reg(const Matrix& e0, std::span<const Index> rows, Scalar coeff) {
  if (coeff < 0.0) {
    throw std::invalid_argument("l2_reg: coeff must be >= 0");
  }
  SlotMap slots(std::vector<Index>(rows.begin(), rows.end()));
  LossValue out;
  out.grads.ids = slots.ids;
  out.grads.rows =
      Matrix::Zero(static_cast<Index>(slots.ids.size()), e0.cols());
  for (std::size_t i = 0; i < slots.ids.size(); ++i) {
    const auto row = e0.row(slots.ids[i]);
    out.value += 0.5 * coeff * row.squaredNorm();
    out.grads.rows.row(static_cast<Index>(i)) = coeff * row;
  }
  return out;
}

}  // namespace hgcl
