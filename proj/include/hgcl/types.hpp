#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace hgcl {

using Scalar = double;
using Index = Eigen::Index;

// Row-major throughout: embedding rows are the unit of access everywhere.
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

}  // namespace hgcl
