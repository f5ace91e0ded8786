#include "doctest.h"

#include <cmath>

#include "modeiv/basis.hpp"
#include "modeiv/error.hpp"

using namespace modeiv;

TEST_CASE("univariate powers are range scaled to [-1, 1]") {
  const UnivariateBasis b(0.0, 10.0, 3, 0, 0.5);
  CHECK(b.size() == 3);
  VectorXd out(3);
  b.evaluate(10.0, out);
  CHECK(out(0) == doctest::Approx(1.0));
  CHECK(out(2) == doctest::Approx(1.0));
  b.evaluate(0.0, out);
  CHECK(out(0) == doctest::Approx(-1.0));
  CHECK(out(1) == doctest::Approx(1.0));
  CHECK(out(2) == doctest::Approx(-1.0));
  b.evaluate(7.5, out);
  CHECK(out(0) == doctest::Approx(0.5));
  CHECK(out(1) == doctest::Approx(0.25));
}

TEST_CASE("radial bumps peak at evenly spaced centres") {
  const UnivariateBasis b(0.0, 10.0, 1, 3, 0.5);
  CHECK(b.size() == 4);
  VectorXd out(4);
  b.evaluate(5.0, out);
  CHECK(out(2) == doctest::Approx(1.0));
  // Spacing 5, width 2.5: neighbour centres are two widths away.
  CHECK(out(1) == doctest::Approx(std::exp(-2.0)));
  CHECK(out(3) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("fit widens a degenerate range") {
  const VectorXd v = VectorXd::Constant(5, 3.0);
  const auto b = UnivariateBasis::fit(v, 2, 0, 0.5);
  CHECK(b.lo() == doctest::Approx(2.5));
  CHECK(b.hi() == doctest::Approx(3.5));
  CHECK_THROWS_AS(UnivariateBasis(1.0, 1.0, 1, 0, 0.5), ConfigError);
}

TEST_CASE("covariate map without expansion is [1, x]") {
  MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  const auto basis = CovariateBasis::fit(x, BasisSpec{});
  CHECK(basis.size() == 3);
  CHECK(basis.modifier_size() == 1);
  const MatrixXd f = basis.features(x);
  CHECK(f(1, 0) == 1.0);
  CHECK(f(1, 1) == 3.0);
  CHECK(f(1, 2) == 4.0);
}

TEST_CASE("covariate map with an expanded column and interactions") {
  MatrixXd x(3, 3);
  x << 0, 1, 0,  //
      5, 0, 1,   //
      10, 0, 0;
  BasisSpec spec;
  spec.degree = 2;
  spec.bumps = 1;
  spec.expand_column = 0;
  spec.interact = true;
  const auto basis = CovariateBasis::fit(x, spec);
  // 1 + two other covariates + 3 expansion terms + 2 * 3 interactions.
  CHECK(basis.size() == 12);
  CHECK(basis.modifier_size() == 4);

  VectorXd f(12), m(4), e(3);
  basis.features(x.row(1).transpose(), f);
  basis.modifiers(x.row(1).transpose(), m);
  basis.expansion().evaluate(5.0, e);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 0.0);
  CHECK(f(2) == 1.0);
  for (int b = 0; b < 3; ++b) {
    CHECK(f(3 + b) == doctest::Approx(e(b)));
    CHECK(f(6 + b) == 0.0);
    CHECK(f(9 + b) == doctest::Approx(e(b)));
    CHECK(m(1 + b) == doctest::Approx(e(b)));
  }
  CHECK(m(0) == 1.0);

  spec.interact = false;
  CHECK(CovariateBasis::fit(x, spec).size() == 6);
  spec.expand_column = 3;
  CHECK_THROWS_AS(CovariateBasis::fit(x, spec), ConfigError);
}

TEST_CASE("features reject a wrong-length covariate vector") {
  const auto basis = CovariateBasis::fit(MatrixXd::Ones(2, 2), BasisSpec{});
  VectorXd out(3);
  CHECK_THROWS_AS(basis.features(VectorXd::Ones(3), out), DimensionError);
}
