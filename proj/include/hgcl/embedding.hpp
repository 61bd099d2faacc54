#pragma once

#include <span>
#include <vector>

#include "hgcl/graph.hpp"
#include "hgcl/rng.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Fixed-norm perturbation switch for training forwards (noise-free when
/// disabled or epsilon == 0).
struct NoiseSpec {
  Scalar epsilon = 0.0;
  bool enabled = false;

  bool active() const { return enabled && epsilon > 0.0; }
};

/// Layer-0 parameters plus the per-layer propagation outputs and their mean
/// pooling. Users occupy rows [0, m), items rows [m, m+n).
struct EmbeddingState {
  Matrix e0;
  std::vector<Matrix> layers;  // K+1 entries, layers[0] == e0
  Matrix pooled;

  Index dim() const { return e0.cols(); }
  int num_layers() const { return static_cast<int>(layers.size()) - 1; }
};

/// Uniform Xavier/Glorot init: entries in [-sqrt(6/(rows+d)), +sqrt(6/(rows+d))].
Matrix xavier_init(Index rows, Index d, Rng& rng);

/// One fixed-norm perturbation row per row of `ref`: eps * normalize(sign(ref_i) o u),
/// u uniform in [0,1)^d. Every row has Euclidean norm exactly eps.
Matrix noise_like(const Matrix& ref, Scalar eps, Rng& rng);

/// Normalized-adjacency product with zero-degree rows carried forward
/// unchanged (so isolated nodes keep their representation instead of
/// collapsing to zero).
Matrix apply_adjacency(const NormalizedAdjacency& adj, const Matrix& x);

/// K rounds of layers[k+1] = A_hat * (layers[k] + noise[k]). `noise` is
/// either empty (noise-free) or holds K precomputed perturbation matrices.
EmbeddingState propagate(const NormalizedAdjacency& adj, const Matrix& e0,
                         int K, std::span<const Matrix> noise);

/// Convenience overload drawing the perturbations from `rng` per layer.
EmbeddingState propagate(const NormalizedAdjacency& adj, const Matrix& e0,
                         int K, const NoiseSpec& noise, Rng& rng);

/// Arithmetic mean over layers 0..K.
Matrix pool_layers(const std::vector<Matrix>& layers);

/// Dot product of user row and item row (items offset by num_users).
Scalar base_score(const Matrix& pooled, Index num_users, Index user,
                  Index item);

}  // namespace hgcl
