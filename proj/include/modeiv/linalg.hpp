#pragma once

#include <Eigen/Dense>

namespace modeiv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative singular-value cutoff below which directions count as null.
inline constexpr double kRankTolerance = 1e-10;

enum class RankPolicy {
  /// Throw SingularDesignError when the (unpenalized) design loses rank.
  strict,
  /// Return the minimum-norm solution instead.
  tolerant,
};

struct LeastSquaresFit {
  MatrixXd coefficients;  // cols(X) x cols(Y)
  MatrixXd residuals;     // rows(X) x cols(Y), on the unaugmented rows
  Index rank = 0;
  double condition = 0.0;  // largest / smallest retained singular value
};

/// Ridge least squares min ||Y - X B||^2 + ridge * ||D B||^2 where D is the
/// identity with its first `unpenalized` diagonal entries zeroed.
///
/// Solved by Householder QR of the augmented system followed by an SVD of the
/// triangular factor; singular values below kRankTolerance times the largest
/// are treated as zero.
LeastSquaresFit solve_least_squares(const MatrixXd& X, const MatrixXd& Y,
                                    double ridge = 0.0, Index unpenalized = 1,
                                    RankPolicy policy = RankPolicy::strict);

/// Residual sum of squares of each column of Y after projecting on X
/// (rank-tolerant, no penalty).
VectorXd residual_sum_of_squares(const MatrixXd& X, const MatrixXd& Y);

}  // namespace modeiv
