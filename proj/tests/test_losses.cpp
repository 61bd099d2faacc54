#include <doctest.h>

#include <cmath>
#include <vector>

#include "hgcl/adam.hpp"
#include "hgcl/losses.hpp"
#include "oracles.hpp"

using namespace hgcl;

namespace {

Matrix dense_from(const RowGradients& g, Index rows, Index cols) {
  Matrix d = Matrix::Zero(rows, cols);
  g.scatter_into(d);
  return d;
}

}  // namespace

TEST_CASE("bpr closed forms") {
  const Scalar zero[] = {0.0};
  const Scalar pos[] = {40.0};
  const Scalar one[] = {1.0};
  const Scalar base[] = {0.0, 0.0, 0.0};
  CHECK(bpr_loss({zero, 1}, {zero, 1}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bpr_loss({pos, 1}, {zero, 1}) < 1e-15);
  CHECK(bpr_loss({one, 1}, {zero, 1}) ==
        doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
  // Sums over aligned lists.
  CHECK(bpr_loss({base, 3}, {base, 3}) ==
        doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bpr_loss({base, 3}, {base, 2}), std::invalid_argument);
}

TEST_CASE("bpr strictly decreases as the margin grows") {
  const Scalar z = 0.0;
  Scalar prev = 1e300;
  for (Scalar diff = -10.0; diff <= 10.0; diff += 0.25) {
    const Scalar cur = bpr_loss({&diff, 1}, {&z, 1});
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("pooled-space bpr gradient is the textbook derivative") {
  Matrix pooled(3, 2);  // user 0, items 0..1 (offset 1)
  pooled << 0.3, -0.2, 1.0, 0.5, -0.4, 0.8;
  const BprTriple t{0, 0, 1};
  const auto [value, grads] = bpr_pooled_grads({&t, 1}, pooled, 1);
  const Scalar diff =
      pooled.row(0).dot(pooled.row(1)) - pooled.row(0).dot(pooled.row(2));
  CHECK(value == doctest::Approx(softplus(-diff)).epsilon(1e-12));
  const Scalar s = -stable_sigmoid(-diff);
  const Matrix d = dense_from(grads, 3, 2);
  CHECK((d.row(0) - s * (pooled.row(1) - pooled.row(2))).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((d.row(1) - s * pooled.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((d.row(2) + s * pooled.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero embeddings give a zero user gradient") {
  const Matrix pooled = Matrix::Zero(4, 3);
  const BprTriple t{0, 0, 2};
  const auto [value, grads] = bpr_pooled_grads({&t, 1}, pooled, 1);
  CHECK(value == doctest::Approx(std::log(2.0)));
  CHECK(dense_from(grads, 4, 3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bpr gradient through the propagation chain matches FD") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    const Index m = 4 + static_cast<Index>(rng.bounded(5));
    const Index n = 4 + static_cast<Index>(rng.bounded(5));
    const Index d = 2 + static_cast<Index>(rng.bounded(4));
    const int K = 1 + static_cast<int>(rng.bounded(3));
    const auto g = testing::random_graph(m, n, rng, 0.3);
    const auto adj = normalize_adjacency(g);
    const Matrix e0 = xavier_init(m + n, d, rng);
    const auto triples = sample_bpr_triples(g, 6, rng);

    const auto state = propagate(adj, e0, K, {});
    const LossValue lv = bpr_grad(triples, state, adj);
    const Matrix analytic = dense_from(lv.grads, m + n, d);

    const auto f = [&](const Matrix& x) {
      const auto st = propagate(adj, x, K, {});
      std::vector<Scalar> sp, sn;
      for (const auto& t : triples) {
        sp.push_back(base_score(st.pooled, m, t.user, t.pos));
        sn.push_back(base_score(st.pooled, m, t.user, t.neg));
      }
      return bpr_loss(sp, sn);
    };
    CHECK(std::abs(f(e0) - lv.value) < 1e-12);
    CHECK(testing::fd_max_rel_err(f, e0, analytic) < 1e-4);
  }
}

TEST_CASE("noise enters the chain as a constant offset") {
  Rng rng(113);
  const Index m = 5, n = 6, d = 3;
  const int K = 2;
  const auto g = testing::random_graph(m, n, rng, 0.3);
  const auto adj = normalize_adjacency(g);
  const Matrix e0 = xavier_init(m + n, d, rng);
  std::vector<Matrix> noise;
  for (int k = 0; k < K; ++k) noise.push_back(noise_like(e0, 0.2, rng));
  const auto triples = sample_bpr_triples(g, 5, rng);

  const auto state = propagate(adj, e0, K, noise);
  const LossValue lv = bpr_grad(triples, state, adj);
  const Matrix analytic = dense_from(lv.grads, m + n, d);
  const auto f = [&](const Matrix& x) {
    const auto st = propagate(adj, x, K, noise);
    std::vector<Scalar> sp, sn;
    for (const auto& t : triples) {
      sp.push_back(base_score(st.pooled, m, t.user, t.pos));
      sn.push_back(base_score(st.pooled, m, t.user, t.neg));
    }
    return bpr_loss(sp, sn);
  };
  CHECK(testing::fd_max_rel_err(f, e0, analytic) < 1e-4);
}

TEST_CASE("infonce single-element batch is exactly zero") {
  Rng rng(7);
  const Matrix e = xavier_init(3, 4, rng);
  const Index batch[] = {1};
  const auto res = cross_layer_infonce(e, e, {batch, 1}, 0.15);
  CHECK(res.value == 0.0);
}

TEST_CASE("infonce two-element closed form") {
  Matrix ek(2, 2), eks(2, 2);
  ek << 1, 0, 0, 1;
  eks << 1, 0, 0, 1;  // each row aligned with itself, orthogonal to the other
  const Index batch[] = {0, 1};
  const auto res = cross_layer_infonce(ek, eks, {batch, 2}, 1.0);
  // Each term: -log(e / (e + 1)) = log(1 + 1/e).
  CHECK(res.value ==
        doctest::Approx(2.0 * std::log1p(std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("infonce keeps duplicate batch entries in the denominator") {
  Matrix e(1, 3);
  e << 0.4, -0.2, 0.7;
  const Index batch[] = {0, 0};
  const auto res = cross_layer_infonce(e, e, {batch, 2}, 0.5);
  // Both denominators hold two identical exponentials: each term = log 2.
  CHECK(res.value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("infonce is invariant to positive row rescaling") {
  Rng rng(19);
  Matrix ek = xavier_init(6, 5, rng);
  const Matrix eks = xavier_init(6, 5, rng);
  std::vector<Index> batch{0, 2, 3, 5};
  const Scalar before = cross_layer_infonce(ek, eks, batch, 0.2).value;
  ek.row(2) *= 7.5;
  const Scalar after = cross_layer_infonce(ek, eks, batch, 0.2).value;
  CHECK(std::abs(before - after) < 1e-9);
}

TEST_CASE("infonce rejects zero-norm rows, empty batches, bad tau") {
  Matrix e = Matrix::Zero(2, 3);
  e.row(0) << 1, 0, 0;
  const std::vector<Index> batch{0, 1};
  CHECK_THROWS_AS(cross_layer_infonce(e, e, batch, 0.2),
                  std::invalid_argument);
  Matrix ok(2, 3);
  ok << 1, 0, 0, 0, 1, 0;
  CHECK_THROWS_AS(cross_layer_infonce(ok, ok, std::vector<Index>{}, 0.2),
                  std::invalid_argument);
  CHECK_THROWS_AS(cross_layer_infonce(ok, ok, batch, 0.0),
                  std::invalid_argument);
}

TEST_CASE("infonce gradients match FD in both views") {
  Rng rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    const Index rows = 9, d = 5;
    const Matrix ek = xavier_init(rows, d, rng);
    const Matrix eks = xavier_init(rows, d, rng);
    std::vector<Index> batch{0, 2, 3, 3, 5, 6, 7, 8};  // includes a duplicate
    const Scalar tau = 0.2;

    const auto res = cross_layer_infonce(ek, eks, batch, tau);
    const Matrix gk = dense_from(res.grad_view_k, rows, d);
    const Matrix gks = dense_from(res.grad_view_kstar, rows, d);

    const auto f_k = [&](const Matrix& x) {
      return cross_layer_infonce(x, eks, batch, tau).value;
    };
    const auto f_ks = [&](const Matrix& x) {
      return cross_layer_infonce(ek, x, batch, tau).value;
    };
    CHECK(testing::fd_max_rel_err(f_k, ek, gk) < 1e-4);
    CHECK(testing::fd_max_rel_err(f_ks, eks, gks) < 1e-4);
  }
}

TEST_CASE("chain_backprop is the adjoint of pooled propagation") {
  Rng rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const Index m = 4 + static_cast<Index>(rng.bounded(4));
    const Index n = 4 + static_cast<Index>(rng.bounded(4));
    const Index d = 3;
    const int K = 1 + static_cast<int>(rng.bounded(3));
    const auto g = testing::random_graph(m, n, rng, 0.25);
    const auto adj = normalize_adjacency(g);
    const Matrix e0 = xavier_init(m + n, d, rng);
    const Matrix G = xavier_init(m + n, d, rng);  // fixed cotangent

    const RowGradients pg = compress_gradients(G);
    const Matrix analytic = chain_backprop(adj, K, pg, {});
    const auto f = [&](const Matrix& x) {
      return (propagate(adj, x, K, {}).pooled.array() * G.array()).sum();
    };
    CHECK(testing::fd_max_rel_err(f, e0, analytic) < 1e-4);
  }
}

TEST_CASE("chain_backprop routes direct layer contributions") {
  Rng rng(37);
  const Index m = 5, n = 5, d = 3;
  const int K = 3, K_star = 1;
  const auto g = testing::random_graph(m, n, rng, 0.3);
  const auto adj = normalize_adjacency(g);
  const Matrix e0 = xavier_init(m + n, d, rng);
  const Matrix G1 = xavier_init(m + n, d, rng);
  const Matrix G2 = xavier_init(m + n, d, rng);

  const RowGradients g1 = compress_gradients(G1);
  const RowGradients g2 = compress_gradients(G2);
  const std::vector<LayerGrad> directs{{K, &g1}, {K_star, &g2}};
  const RowGradients no_pooled;  // empty
  const Matrix analytic = chain_backprop(adj, K, no_pooled, directs);

  const auto f = [&](const Matrix& x) {
    const auto st = propagate(adj, x, K, {});
    return (st.layers[static_cast<std::size_t>(K)].array() * G1.array())
               .sum() +
           (st.layers[static_cast<std::size_t>(K_star)].array() * G2.array())
               .sum();
  };
  CHECK(testing::fd_max_rel_err(f, e0, analytic) < 1e-4);
}

TEST_CASE("l2 closed forms, dedup, loop oracle") {
  Matrix e0(2, 2);
  e0 << 3, 4, 1, 1;
  const std::vector<Index> rows{0};
  CHECK(l2_reg(e0, rows, 0.0).value == 0.0);
  CHECK(l2_reg(e0, rows, 1.0).value == doctest::Approx(12.5).epsilon(1e-12));
  const std::vector<Index> dup{0, 0, 0};
  CHECK(l2_reg(e0, dup, 1.0).value == doctest::Approx(12.5).epsilon(1e-12));

  Rng rng(43);
  const Matrix big = xavier_init(10, 6, rng);
  const std::vector<Index> touched{1, 3, 3, 7};
  const auto lv = l2_reg(big, touched, 0.37);
  Scalar manual = 0.0;
  for (Index r : {1, 3, 7}) manual += 0.37 * big.row(r).squaredNorm() / 2.0;
  CHECK(std::abs(lv.value - manual) < 1e-12);
  const Matrix gd = dense_from(lv.grads, 10, 6);
  for (Index r : {1, 3, 7}) {
    CHECK((gd.row(r) - 0.37 * big.row(r)).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK(gd.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(l2_reg(big, touched, -0.1), std::invalid_argument);
}

TEST_CASE("compress, scatter, and merge are mutually consistent") {
  Rng rng(47);
  Matrix a = Matrix::Zero(8, 3);
  a.row(1) << 1, 2, 3;
  a.row(5) << -1, 0, 4;
  const RowGradients ga = compress_gradients(a);
  CHECK(ga.ids == std::vector<Index>{1, 5});
  CHECK(dense_from(ga, 8, 3) == a);

  Matrix b = Matrix::Zero(8, 3);
  b.row(5) << 10, 10, 10;
  b.row(6) << 2, 2, 2;
  const RowGradients gb = compress_gradients(b);
  const RowGradients merged = merge_gradients(ga, gb);
  CHECK(merged.ids == std::vector<Index>{1, 5, 6});
  CHECK(dense_from(merged, 8, 3) == Matrix(a + b));
}

TEST_CASE("adam first-step magnitude and untouched rows") {
  Matrix params = Matrix::Zero(3, 2);
  AdamState st = make_adam_state(3, 2, 0.1);
  Matrix gd = Matrix::Zero(3, 2);
  gd.row(0) << 0.5, -2.0;
  adam_step(params, compress_gradients(gd), st);
  CHECK(st.t == 1);
  // Bias-corrected first step is lr * g/(|g| + eps') per entry: magnitude
  // barely below lr, direction opposite the gradient.
  CHECK(params(0, 0) < 0.0);
  CHECK(params(0, 1) > 0.0);
  CHECK(params.row(0).cwiseAbs().maxCoeff() <= 0.1 * (1.0 + 1e-6));
  CHECK(params.row(0).cwiseAbs().minCoeff() >= 0.1 * (1.0 - 1e-6));
  CHECK(params.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.m1.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam matches a dense scalar reference when all rows are touched") {
  Rng rng(53);
  Matrix params = xavier_init(4, 3, rng);
  Matrix ref = params;
  AdamState st = make_adam_state(4, 3, 0.01);
  Matrix m1 = Matrix::Zero(4, 3), m2 = Matrix::Zero(4, 3);
  for (int step = 1; step <= 25; ++step) {
    const Matrix grad = xavier_init(4, 3, rng);
    adam_step(params, compress_gradients(grad), st);
    // Reference update, entry by entry.
    for (Index r = 0; r < 4; ++r) {
      for (Index c = 0; c < 3; ++c) {
        const Scalar gv = grad(r, c);
        m1(r, c) = 0.9 * m1(r, c) + 0.1 * gv;
        m2(r, c) = 0.999 * m2(r, c) + 0.001 * gv * gv;
        const Scalar mh = m1(r, c) / (1.0 - std::pow(0.9, step));
        const Scalar vh = m2(r, c) / (1.0 - std::pow(0.999, step));
        ref(r, c) -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
  }
  CHECK((params - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adam steps the counter on empty gradients") {
  Matrix params = Matrix::Zero(2, 2);
  AdamState st = make_adam_state(2, 2, 0.1);
  adam_step(params, RowGradients{}, st);
  adam_step(params, RowGradients{}, st);
  CHECK(st.t == 2);
  CHECK(params.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam descends a quadratic bowl") {
  Matrix x(1, 4);
  x << 3.0, -2.0, 1.5, 4.0;
  const Scalar initial = x.norm();
  AdamState st = make_adam_state(1, 4, 0.05);
  for (int i = 0; i < 100; ++i) {
    const Matrix grad = 2.0 * x;  // d/dx ||x||^2
    adam_step(x, compress_gradients(grad), st);
  }
  CHECK(x.norm() < initial);
}
