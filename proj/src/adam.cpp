#include "hgcl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace hgcl {

AdamState make_adam_state(Index rows, Index cols, Scalar lr) {
  AdamState state;
  state.m1 = Matrix::Zero(rows, cols);
  state.m2 = Matrix::Zero(rows, cols);
  state.lr = lr;
  return state;
}

void adam_step(Matrix& params, const RowGradients& grads, AdamState& state) {
  if (params.rows() != state.m1.rows() || params.cols() != state.m1.cols()) {
    throw std::invalid_argument("adam_step: state/parameter shape mismatch");
  }
  ++state.t;
  if (grads.empty()) return;
  if (grads.rows.cols() != params.cols()) {
    throw std::invalid_argument("adam_step: gradient width mismatch");
  }

  const Scalar bc1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.t));
  const Scalar bc2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.t));
  for (std::size_t i = 0; i < grads.ids.size(); ++i) {
    const Index r = grads.ids[i];
    const auto g = grads.rows.row(static_cast<Index>(i)).array();
    state.m1.row(r).array() =
        state.beta1 * state.m1.row(r).array() + (1.0 - state.beta1) * g;
    state.m2.row(r).array() =
        state.beta2 * state.m2.row(r).array() + (1.0 - state.beta2) * g * g;
    params.row(r).array() -=
        state.lr * (state.m1.row(r).array() / bc1) /
        ((state.m2.row(r).array() / bc2).sqrt() + state.eps_hat);
  }
}

}  // namespace hgcl
