#pragma once

#include "hgcl/losses.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Adam moments over an embedding table, updated lazily: only rows carrying
/// gradient this step touch their moments; bias correction uses the global
/// step counter.
struct AdamState {
  Matrix m1;
  Matrix m2;
  long t = 0;
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps_hat = 1e-8;
};

AdamState make_adam_state(Index rows, Index cols, Scalar lr);

/// Advance the step counter and apply the bias-corrected update to the rows
/// named in `grads`.
void adam_step(Matrix& params, const RowGradients& grads, AdamState& state);

}  // namespace hgcl
