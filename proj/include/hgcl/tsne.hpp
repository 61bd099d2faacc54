#pragma once

#include <span>
#include <utility>

#include "hgcl/rng.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

struct TsneConfig {
  Scalar perplexity = 30.0;
  int iters = 1000;
  Scalar lr = 200.0;
  Scalar early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  Scalar momentum_start = 0.5;
  Scalar momentum_final = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 0;
  bool student_t_input = false;  // heavy-tailed input kernel instead of
                                 // perplexity-calibrated Gaussians
  Index subsample = 0;           // 0 = project every row

  /// Throws std::invalid_argument; n is the row count to be projected.
  void validate(Index n) const;
};

struct Projection2D {
  Matrix coords;  // n x 2, re-centered every iteration
  Scalar final_kl = 0.0;
};

/// Dense pairwise squared Euclidean distances, zero diagonal.
Matrix pairwise_sq_dists(const Matrix& x);

/// Per-point Gaussian bandwidth sigma_i: binary search (<= 64 iterations) so
/// the perplexity 2^{H(P_i)} of the conditional distribution over the other
/// points matches `perplexity` within 1e-3. `sq_row` is the point's squared
/// distances to all points including itself (`self`).
Scalar calibrate_sigma(std::span<const Scalar> sq_row, Index self,
                       Scalar perplexity);

/// Conditional probabilities for one point given its bandwidth; entry `self`
/// is zero.
Vector conditional_probs(std::span<const Scalar> sq_row, Index self,
                         Scalar sigma);

/// Symmetrized input similarities P (sum 1, zero diagonal). Gaussian with
/// per-point calibration by default; with cfg.student_t_input the kernel is
/// (1 + d^2)^{-1} globally normalized and perplexity is ignored.
Matrix tsne_input_similarities(const Matrix& x, const TsneConfig& cfg);

/// Sum p log(p/q) in nats over all entries, with the 0 log 0 = 0 convention.
/// Throws when q == 0 at an entry where p > 0.
Scalar kl_divergence(const Matrix& p, const Matrix& q);

/// KL(P || Q(y)) for the Student-t low-dimensional kernel.
Scalar tsne_kl(const Matrix& p, const Matrix& y);

/// Analytic KL gradient w.r.t. the 2-D coordinates:
/// 4 sum_j (p_ij - q_ij) (1+||y_i-y_j||^2)^{-1} (y_i - y_j).
Matrix tsne_gradient(const Matrix& p, const Matrix& y);

/// Exact t-SNE: early exaggeration, momentum schedule, per-entry gain
/// adaptation, re-centering each iteration. final_kl uses the
/// un-exaggerated P. Requires n >= 4 and non-degenerate input.
Projection2D tsne_embed(const Matrix& x, const TsneConfig& cfg);

/// tsne_embed with the optional subsample knob: when 0 < cfg.subsample < n,
/// only a seeded random subset is optimized and every remaining row adopts
/// the coordinates of its nearest sampled row in the input space.
Matrix reduce_items(const Matrix& items, const TsneConfig& cfg);

}  // namespace hgcl
