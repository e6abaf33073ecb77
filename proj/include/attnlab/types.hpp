#pragma once

#include <Eigen/Dense>

namespace attnlab {

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatX<double>;
using Vector = VecX<double>;
using Index = Eigen::Index;

/// N x d matrix of token representations, row i = token i.
using TokenMatrix = Matrix;

/// Row-stochastic N x N matrix whose sparsity pattern follows a MaskGraph.
using AttentionMatrix = Matrix;

}  // namespace attnlab
