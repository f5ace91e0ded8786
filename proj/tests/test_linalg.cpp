#include "doctest.h"

#include "modeiv/error.hpp"
#include "modeiv/linalg.hpp"
#include "modeiv/random.hpp"

using namespace modeiv;

namespace {

MatrixXd random_matrix(Rng& rng, Index r, Index c) {
  MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("full-rank least squares matches normal equations") {
  Rng rng(1);
  const MatrixXd X = random_matrix(rng, 50, 4);
  const MatrixXd Y = random_matrix(rng, 50, 2);
  const auto fit = solve_least_squares(X, Y);
  const MatrixXd ref = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  CHECK((fit.coefficients - ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.rank == 4);
  CHECK((fit.residuals - (Y - X * ref)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ridge leaves the unpenalized columns free") {
  Rng rng(2);
  const MatrixXd X = random_matrix(rng, 60, 3);
  const MatrixXd Y = random_matrix(rng, 60, 1);
  const double lambda = 5.0;
  const auto fit = solve_least_squares(X, Y, lambda, 1);
  MatrixXd D = MatrixXd::Identity(3, 3);
  D(0, 0) = 0.0;
  const MatrixXd ref =
      (X.transpose() * X + lambda * D).ldlt().solve(X.transpose() * Y);
  CHECK((fit.coefficients - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank deficiency: strict throws, tolerant gives minimum norm") {
  Rng rng(3);
  MatrixXd X = random_matrix(rng, 30, 3);
  X.col(2) = X.col(0) + X.col(1);
  const MatrixXd Y = random_matrix(rng, 30, 1);
  CHECK_THROWS_AS(solve_least_squares(X, Y, 0.0), SingularDesignError);

  const auto fit = solve_least_squares(X, Y, 0.0, 0, RankPolicy::tolerant);
  CHECK(fit.rank == 2);
  const MatrixXd pinv = X.completeOrthogonalDecomposition().pseudoInverse();
  CHECK((fit.coefficients - pinv * Y).cwiseAbs().maxCoeff() < 1e-9);

  // A positive ridge on the collinear columns restores a unique solution.
  CHECK_NOTHROW(solve_least_squares(X, Y, 1e-3, 0));
}

TEST_CASE("residual sums of squares per column") {
  Rng rng(4);
  const MatrixXd X = random_matrix(rng, 40, 2);
  const MatrixXd Y = random_matrix(rng, 40, 3);
  const VectorXd rss = residual_sum_of_squares(X, Y);
  const MatrixXd B = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  const MatrixXd R = Y - X * B;
  for (Index j = 0; j < 3; ++j) CHECK(rss(j) == doctest::Approx(R.col(j).squaredNorm()));
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(solve_least_squares(MatrixXd::Ones(3, 2), MatrixXd::Ones(4, 1)),
                  DimensionError);
  CHECK_THROWS_AS(solve_least_squares(MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 1), -1.0),
                  ConfigError);
  CHECK_THROWS_AS(solve_least_squares(MatrixXd::Ones(1, 2), MatrixXd::Ones(1, 1)),
                  SingularDesignError);
}
