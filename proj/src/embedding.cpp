#include "hgcl/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace hgcl {

Matrix xavier_init(Index rows, Index d, Rng& rng) {
  if (rows < 1 || d < 1) {
    throw std::invalid_argument("xavier_init: rows and d must be >= 1");
  }
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(rows + d));
  Matrix m(rows, d);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < d; ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
  return m;
}

Matrix noise_like(const Matrix& ref, Scalar eps, Rng& rng) {
  Matrix delta(ref.rows(), ref.cols());
  for (Index r = 0; r < ref.rows(); ++r) {
    for (Index c = 0; c < ref.cols(); ++c) {
      const Scalar sign = ref(r, c) < 0.0 ? -1.0 : 1.0;
      delta(r, c) = sign * rng.uniform();
    }
    Scalar norm = delta.row(r).norm();
    if (norm < 1e-300) {
      delta(r, 0) = 1.0;  // all-zero draw, measure zero
      norm = 1.0;
    }
    delta.row(r) *= eps / norm;
  }
  return delta;
}

Matrix apply_adjacency(const NormalizedAdjacency& adj, const Matrix& x) {
  const Index m = adj.num_users;
  const Index n = adj.num_items;
  if (x.rows() != m + n) {
    throw std::invalid_argument("apply_adjacency: row count mismatch");
  }
  Matrix out(m + n, x.cols());
  out.topRows(m).noalias() = adj.user_item * x.bottomRows(n);
  out.bottomRows(n).noalias() = adj.item_user * x.topRows(m);
  for (Index r = 0; r < m + n; ++r) {
    if (adj.zero_degree[static_cast<std::size_t>(r)]) out.row(r) = x.row(r);
  }
  return out;
}

EmbeddingState propagate(const NormalizedAdjacency& adj, const Matrix& e0,
                         int K, std::span<const Matrix> noise) {
  if (e0.rows() != adj.nodes()) {
    throw std::invalid_argument("propagate: e0 rows != m+n");
  }
  if (K < 1) throw std::invalid_argument("propagate: K must be >= 1");
  if (!noise.empty() && static_cast<int>(noise.size()) != K) {
    throw std::invalid_argument("propagate: need one noise matrix per layer");
  }

  EmbeddingState state;
  state.e0 = e0;
  state.layers.reserve(static_cast<std::size_t>(K) + 1);
  state.layers.push_back(e0);
  for (int k = 0; k < K; ++k) {
    if (noise.empty()) {
      state.layers.push_back(apply_adjacency(adj, state.layers.back()));
    } else {
      state.layers.push_back(
          apply_adjacency(adj, state.layers.back() + noise[k]));
    }
  }
  state.pooled = pool_layers(state.layers);
  return state;
}

EmbeddingState propagate(const NormalizedAdjacency& adj, const Matrix& e0,
                         int K, const NoiseSpec& noise, Rng& rng) {
  if (!noise.active()) return propagate(adj, e0, K, {});
  std::vector<Matrix> deltas;
  deltas.reserve(static_cast<std::size_t>(K));
  // Each perturbation depends on the sign pattern of the layer it perturbs,
  // so layers are built as the deltas are drawn.
  EmbeddingState state;
  state.e0 = e0;
  state.layers.push_back(e0);
  for (int k = 0; k < K; ++k) {
    deltas.push_back(noise_like(state.layers.back(), noise.epsilon, rng));
    state.layers.push_back(
        apply_adjacency(adj, state.layers.back() + deltas.back()));
  }
  state.pooled = pool_layers(state.layers);
  return state;
}

Matrix pool_layers(const std::vector<Matrix>& layers) {
  if (layers.empty()) {
    throw std::invalid_argument("pool_layers: no layers");
  }
  Matrix sum = layers[0];
  for (std::size_t k = 1; k < layers.size(); ++k) sum += layers[k];
  return sum / static_cast<Scalar>(layers.size());
}

Scalar base_score(const Matrix& pooled, Index num_users, Index user,
                  Index item) {
  const Index num_items = pooled.rows() - num_users;
  if (user < 0 || user >= num_users || item < 0 || item >= num_items) {
    throw std::out_of_range("base_score: user or item id out of range");
  }
  return pooled.row(user).dot(pooled.row(num_users + item));
}

}  // namespace hgcl
