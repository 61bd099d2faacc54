#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hgcl/embedding.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Sparse per-row gradients: rows.row(i) is the gradient for node ids[i].
/// Ids are sorted and unique.
struct RowGradients {
  std::vector<Index> ids;
  Matrix rows;

  bool empty() const { return ids.empty(); }
  void scatter_into(Matrix& dense) const;
};

/// Collapse a dense gradient matrix to its nonzero rows.
RowGradients compress_gradients(const Matrix& dense);

/// Row-wise sum of two sparse gradient sets.
RowGradients merge_gradients(const RowGradients& a, const RowGradients& b);

struct LossValue {
  Scalar value = 0.0;
  RowGradients grads;  // layer-0 parameter space
};

inline Scalar stable_sigmoid(Scalar x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline Scalar softplus(Scalar x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Sum of -log sigmoid(pos - neg) over aligned score lists.
Scalar bpr_loss(std::span<const Scalar> pos, std::span<const Scalar> neg);

/// BPR value plus gradients w.r.t. the pooled representation rows touched by
/// the batch. Items are offset by num_users in the returned ids.
std::pair<Scalar, RowGradients> bpr_pooled_grads(
    std::span<const BprTriple> triples, const Matrix& pooled,
    Index num_users);

/// Direct gradient contributions at given propagation layers.
struct LayerGrad {
  int layer;
  const RowGradients* grads;
};

/// Reverse-mode pass through pooled = mean(layers 0..K) and
/// layers[k+1] = A_hat * layers[k]; injected noise is a constant offset and
/// contributes nothing. Returns the dense gradient w.r.t. the layer-0
/// parameters.
Matrix chain_backprop(const NormalizedAdjacency& adj, int K,
                      const RowGradients& pooled_grad,
                      std::span<const LayerGrad> layer_grads);

/// BPR loss with gradients w.r.t. E^(0) through the propagation chain.
/// Requires the forward state (layers populated).
LossValue bpr_grad(std::span<const BprTriple> triples,
                   const EmbeddingState& state,
                   const NormalizedAdjacency& adj);

/// Cross-layer InfoNCE over a mini-batch of node ids, cosine similarity,
/// with analytic gradients w.r.t. each view's touched rows.
struct InfoNceResult {
  Scalar value = 0.0;
  RowGradients grad_view_k;      // w.r.t. rows of e_k
  RowGradients grad_view_kstar;  // w.r.t. rows of e_kstar
};

InfoNceResult cross_layer_infonce(const Matrix& e_k, const Matrix& e_kstar,
                                  std::span<const Index> batch, Scalar tau);

/// coeff * sum ||row||^2 / 2 over the given layer-0 rows; gradient is
/// coeff * row. Duplicate ids are collapsed.
LossValue l2_reg(const Matrix& e0, std::span<const Index> rows, Scalar coeff);

}  // namespace hgcl
