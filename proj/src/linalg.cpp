#include "modeiv/linalg.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "modeiv/error.hpp"

namespace modeiv {

LeastSquaresFit solve_least_squares(const MatrixXd& X, const MatrixXd& Y,
                                    double ridge, Index unpenalized,
                                    RankPolicy policy) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (Y.rows() != n) throw DimensionError("least squares: X and Y row counts differ");
  if (ridge < 0.0 || !std::isfinite(ridge)) throw ConfigError("ridge penalty must be finite and >= 0");
  if (p == 0) throw DimensionError("least squares: empty design");

  const bool penalized = ridge > 0.0 && unpenalized < p;
  const Index extra = penalized ? p : 0;
  if (n + extra < p && policy == RankPolicy::strict && !penalized) {
    throw SingularDesignError("least squares: fewer rows than columns");
  }

  MatrixXd A(n + extra, p);
  MatrixXd B(n + extra, Y.cols());
  A.topRows(n) = X;
  B.topRows(n) = Y;
  if (penalized) {
    A.bottomRows(p).setZero();
    B.bottomRows(p).setZero();
    const double s = std::sqrt(ridge);
    for (Index j = unpenalized; j < p; ++j) A(n + j, j) = s;
  }

  // Householder QR reduces the tall system to p x p before the SVD.
  Eigen::HouseholderQR<MatrixXd> qr(A);
  const Index m = std::min(A.rows(), p);
  MatrixXd R = MatrixXd::Zero(p, p);
  R.topRows(m) = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  MatrixXd QtB = qr.householderQ().adjoint() * B;
  MatrixXd rhs = MatrixXd::Zero(p, Y.cols());
  rhs.topRows(m) = QtB.topRows(m);

  Eigen::BDCSVD<MatrixXd> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double cutoff = kRankTolerance * smax;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++rank;
  }
  if (rank < p && policy == RankPolicy::strict) {
    std::ostringstream msg;
    msg << "singular design: rank " << rank << " < " << p << " columns";
    if (ridge == 0.0) msg << "; set a positive ridge penalty";
    throw SingularDesignError(msg.str());
  }

  MatrixXd Utb = svd.matrixU().leftCols(rank).adjoint() * rhs;
  for (Index i = 0; i < rank; ++i) Utb.row(i) /= sv(i);
  LeastSquaresFit fit;
  fit.coefficients = svd.matrixV().leftCols(rank) * Utb;
  fit.residuals = Y - X * fit.coefficients;
  fit.rank = rank;
  fit.condition = rank > 0 ? smax / sv(rank - 1) : INFINITY;
  return fit;
}

VectorXd residual_sum_of_squares(const MatrixXd& X, const MatrixXd& Y) {
  const auto fit = solve_least_squares(X, Y, 0.0, 0, RankPolicy::tolerant);
  return fit.residuals.colwise().squaredNorm().transpose();
}

}  // namespace modeiv
