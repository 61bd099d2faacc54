#include "hgcl/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgcl {

void TsneConfig::validate(Index n) const {
  const Index effective = (subsample > 0 && subsample < n) ? subsample : n;
  if (effective < 4) {
    throw std::invalid_argument("tsne: need at least 4 rows to project");
  }
  if (!student_t_input &&
      (perplexity <= 1.0 || perplexity >= static_cast<Scalar>(effective))) {
    throw std::invalid_argument("tsne: perplexity must lie in (1, n)");
  }
  if (iters < 1) throw std::invalid_argument("tsne: iters must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("tsne: lr must be > 0");
  if (early_exaggeration < 1.0) {
    throw std::invalid_argument("tsne: early_exaggeration must be >= 1");
  }
  if (exaggeration_iters < 0 || momentum_switch < 0) {
    throw std::invalid_argument("tsne: schedule lengths must be >= 0");
  }
  if (subsample < 0) throw std::invalid_argument("tsne: subsample must be >= 0");
}

Matrix pairwise_sq_dists(const Matrix& x) {
  const Vector sq = x.rowwise().squaredNorm();
  Matrix d = -2.0 * (x * x.transpose());
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  // Guard tiny negative values from cancellation and force a zero diagonal.
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

namespace {

/// Shifted Gaussian weights and the perplexity they induce, for one beta.
struct RowCalibration {
  Vector weights;  // exp(-beta * (d - dmin)), zero at self
  Scalar sum = 0.0;
  Scalar perplexity = 0.0;
};

RowCalibration row_at_beta(std::span<const Scalar> sq_row, Index self,
                           Scalar beta, Scalar dmin) {
  const Index n = static_cast<Index>(sq_row.size());
  RowCalibration rc;
  rc.weights = Vector::Zero(n);
  Scalar weighted_dist = 0.0;
  for (Index j = 0; j < n; ++j) {
    if (j == self) continue;
    const Scalar shifted = sq_row[static_cast<std::size_t>(j)] - dmin;
    const Scalar w = std::exp(-beta * shifted);
    rc.weights[j] = w;
    rc.sum += w;
    weighted_dist += w * shifted;
  }
  // H in nats = log(sum) + beta * E[d - dmin]; perplexity = e^H.
  const Scalar h = std::log(rc.sum) + beta * weighted_dist / rc.sum;
  rc.perplexity = std::exp(h);
  return rc;
}

Scalar min_off_diagonal(std::span<const Scalar> sq_row, Index self) {
  Scalar dmin = std::numeric_limits<Scalar>::infinity();
  for (Index j = 0; j < static_cast<Index>(sq_row.size()); ++j) {
    if (j != self) dmin = std::min(dmin, sq_row[static_cast<std::size_t>(j)]);
  }
  return dmin;
}

constexpr int kCalibrationIters = 64;
constexpr Scalar kCalibrationTol = 1e-3;

Scalar search_beta(std::span<const Scalar> sq_row, Index self,
                   Scalar perplexity) {
  if (sq_row.size() < 3) {
    throw std::invalid_argument("calibrate_sigma: need at least 2 neighbors");
  }
  const Scalar dmin = min_off_diagonal(sq_row, self);
  Scalar beta = 1.0;
  Scalar beta_lo = -std::numeric_limits<Scalar>::infinity();
  Scalar beta_hi = std::numeric_limits<Scalar>::infinity();
  for (int it = 0; it < kCalibrationIters; ++it) {
    const RowCalibration rc = row_at_beta(sq_row, self, beta, dmin);
    const Scalar diff = rc.perplexity - perplexity;
    if (std::abs(diff) < kCalibrationTol) return beta;
    if (diff > 0.0) {  // too flat: sharpen
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
    } else {
      beta_hi = beta;
      beta = std::isinf(beta_lo) ? beta * 0.5 : 0.5 * (beta + beta_lo);
    }
  }
  throw std::runtime_error(
      "calibrate_sigma: perplexity " + std::to_string(perplexity) +
      " unreachable for this point (coincident neighbors?)");
}

}  // namespace

Scalar calibrate_sigma(std::span<const Scalar> sq_row, Index self,
                       Scalar perplexity) {
  const Scalar beta = search_beta(sq_row, self, perplexity);
  return std::sqrt(0.5 / beta);  // beta = 1 / (2 sigma^2)
}

Vector conditional_probs(std::span<const Scalar> sq_row, Index self,
                         Scalar sigma) {
  const Scalar beta = 0.5 / (sigma * sigma);
  const Scalar dmin = min_off_diagonal(sq_row, self);
  RowCalibration rc = row_at_beta(sq_row, self, beta, dmin);
  rc.weights /= rc.sum;
  return rc.weights;
}

Matrix tsne_input_similarities(const Matrix& x, const TsneConfig& cfg) {
  const Index n = x.rows();
  const Matrix d = pairwise_sq_dists(x);
  if (d.maxCoeff() <= 0.0) {
    throw std::invalid_argument("tsne: all input rows coincide");
  }
  Matrix p(n, n);
  if (cfg.student_t_input) {
    p = (1.0 + d.array()).inverse();
    p.diagonal().setZero();
    p /= p.sum();
    return p;
  }
  for (Index i = 0; i < n; ++i) {
    const std::span<const Scalar> row{d.row(i).data(),
                                      static_cast<std::size_t>(n)};
    const Scalar beta = search_beta(row, i, cfg.perplexity);
    const Scalar dmin = min_off_diagonal(row, i);
    RowCalibration rc = row_at_beta(row, i, beta, dmin);
    p.row(i) = (rc.weights / rc.sum).transpose();
  }
  // .eval() breaks the transpose alias before p is overwritten.
  p = (p + p.transpose().eval()) / (2.0 * static_cast<Scalar>(n));
  return p;
}

Scalar kl_divergence(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw std::invalid_argument("kl_divergence: shape mismatch");
  }
  Scalar kl = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index j = 0; j < p.cols(); ++j) {
      const Scalar pv = p(i, j);
      if (pv <= 0.0) continue;
      const Scalar qv = q(i, j);
      if (qv <= 0.0) {
        throw std::domain_error("kl_divergence: q vanishes where p > 0");
      }
      kl += pv * std::log(pv / qv);
    }
  }
  return kl;
}

namespace {

/// Student-t weights w_ij = (1+||y_i-y_j||^2)^{-1}, zero diagonal.
Matrix low_dim_weights(const Matrix& y) {
  Matrix w = (1.0 + pairwise_sq_dists(y).array()).inverse();
  w.diagonal().setZero();
  return w;
}

}  // namespace

Scalar tsne_kl(const Matrix& p, const Matrix& y) {
  const Matrix w = low_dim_weights(y);
  return kl_divergence(p, w / w.sum());
}

Matrix tsne_gradient(const Matrix& p, const Matrix& y) {
  const Matrix w = low_dim_weights(y);
  const Matrix mult = (p - w / w.sum()).cwiseProduct(w);
  // grad_i = 4 sum_j mult_ij (y_i - y_j) = 4 (rowsum_i y_i - mult * y)
  const Vector rowsum = mult.rowwise().sum();
  return 4.0 * (rowsum.asDiagonal() * y - mult * y);
}

Projection2D tsne_embed(const Matrix& x, const TsneConfig& cfg) {
  cfg.validate(x.rows());
  const Index n = x.rows();
  if (cfg.subsample > 0 && cfg.subsample < n) {
    throw std::invalid_argument(
        "tsne_embed: subsampling is handled by reduce_items");
  }
  const Matrix p = tsne_input_similarities(x, cfg);

  Rng rng(derive_seed(cfg.seed, "tsne-init"));
  Matrix y(n, 2);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < 2; ++c) y(i, c) = 1e-2 * rng.gaussian();
  }

  Matrix inc = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);
  for (int it = 0; it < cfg.iters; ++it) {
    const bool exaggerate = it < cfg.exaggeration_iters;
    const Matrix grad = exaggerate
                            ? tsne_gradient(p * cfg.early_exaggeration, y)
                            : tsne_gradient(p, y);
    const Scalar momentum =
        it < cfg.momentum_switch ? cfg.momentum_start : cfg.momentum_final;
    for (Index i = 0; i < n; ++i) {
      for (Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (inc(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01)
                                : gains(i, c) + 0.2;
      }
    }
    inc = momentum * inc - cfg.lr * gains.cwiseProduct(grad);
    y += inc;
    y.rowwise() -= y.colwise().mean();
  }

  Projection2D out;
  out.coords = std::move(y);
  out.final_kl = tsne_kl(p, out.coords);
  if (!out.coords.allFinite()) {
    throw std::runtime_error("tsne: coordinates diverged to non-finite values");
  }
  return out;
}

Matrix reduce_items(const Matrix& items, const TsneConfig& cfg) {
  const Index n = items.rows();
  if (cfg.subsample <= 0 || cfg.subsample >= n) {
    return tsne_embed(items, cfg).coords;
  }
  cfg.validate(n);

  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  Rng rng(derive_seed(cfg.seed, "tsne-subsample"));
  rng.shuffle(ids);
  std::vector<Index> keep(ids.begin(), ids.begin() + cfg.subsample);
  std::sort(keep.begin(), keep.end());

  Matrix sampled(cfg.subsample, items.cols());
  for (Index r = 0; r < cfg.subsample; ++r) {
    sampled.row(r) = items.row(keep[static_cast<std::size_t>(r)]);
  }
  const Matrix projected = tsne_embed(sampled, cfg).coords;

  Matrix coords(n, 2);
  std::vector<char> is_kept(static_cast<std::size_t>(n), 0);
  for (Index r = 0; r < cfg.subsample; ++r) {
    coords.row(keep[static_cast<std::size_t>(r)]) = projected.row(r);
    is_kept[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])] = 1;
  }
  for (Index i = 0; i < n; ++i) {
    if (is_kept[static_cast<std::size_t>(i)]) continue;
    Index best = 0;
    Scalar best_d = std::numeric_limits<Scalar>::infinity();
    for (Index r = 0; r < cfg.subsample; ++r) {
      const Scalar d2 =
          (items.row(i) - sampled.row(r)).squaredNorm();
      if (d2 < best_d) {
        best_d = d2;
        best = r;
      }
    }
    coords.row(i) = projected.row(best);
  }
  return coords;
}

}  // namespace hgcl
