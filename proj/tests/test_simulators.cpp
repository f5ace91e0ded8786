#include "doctest.h"

#include <cmath>

#include "modeiv/error.hpp"
#include "modeiv/simulators.hpp"

using namespace modeiv;

namespace {

double sample_var(const VectorXd& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

double sample_corr(const VectorXd& a, const VectorXd& b) {
  const double cov = ((a.array() - a.mean()) * (b.array() - b.mean())).sum() /
                     static_cast<double>(a.size() - 1);
  return cov / std::sqrt(sample_var(a) * sample_var(b));
}

bool bitwise_equal(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("psi at reference points") {
  CHECK(psi(5.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(psi(0.0) == doctest::Approx(2.0 * (625.0 / 600.0 + 0.0 - 2.0)).epsilon(1e-12));
  CHECK(psi(0.0) == doctest::Approx(-1.916667).epsilon(1e-6));
  CHECK(psi(10.0) == doctest::Approx(0.083333).epsilon(1e-5));
}

TEST_CASE("round_to_tenth and beta_of_x") {
  CHECK(round_to_tenth(0.26) == doctest::Approx(0.3));
  CHECK(round_to_tenth(0.0) == 0.0);
  CHECK(round_to_tenth(-0.14) == doctest::Approx(-0.1));
  CHECK(round_to_tenth(0.25) == doctest::Approx(0.3));
  CHECK(round_to_tenth(-0.25) == doctest::Approx(-0.3));
  VectorXd g = VectorXd::Zero(10);
  g(0) = 0.4;
  VectorXd x = VectorXd::Zero(10);
  x(0) = 0.5;
  CHECK(beta_of_x(x, g) == doctest::Approx(0.2));
  CHECK_THROWS_AS(beta_of_x(VectorXd::Zero(3), g), DimensionError);
}

TEST_CASE("config validation") {
  DemandConfig d;
  d.valid = {};
  CHECK_NOTHROW(d.validate());
  d.valid = {8};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.valid = {1, 1};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.valid = {0};
  d.gamma = -1.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK_THROWS_AS(valid_after_invalid(8, 8), ConfigError);
  CHECK(valid_after_invalid(8, 3) == std::vector<int>{3, 4, 5, 6, 7});

  MRConfig m;
  m.K = 100;
  m.n_valid = 120;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.n_valid = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("demand parameters respect validity") {
  DemandConfig cfg;
  cfg.valid = valid_after_invalid(8, 3);
  const auto p = draw_demand_parameters(cfg);
  for (int j = 0; j < 8; ++j) {
    CHECK(p.beta_zp(j) >= 0.5);
    CHECK(p.beta_zp(j) < 1.5);
    if (j < 3) {
      CHECK(p.beta_zy(j) >= 0.5);
      CHECK(p.beta_zy(j) < 1.5);
    } else {
      CHECK(p.beta_zy(j) == 0.0);
    }
  }
}

TEST_CASE("demand draws do not depend on gamma or validity") {
  DemandConfig a;
  a.n = 2000;
  a.gamma = 0.0;
  DemandConfig b = a;
  b.gamma = 1.0;
  b.valid = valid_after_invalid(8, 2);
  const auto [da, ta] = generate_demand(a);
  const auto [db, tb] = generate_demand(b);
  CHECK(bitwise_equal(da.z(), db.z()));
  CHECK(bitwise_equal(da.x(), db.x()));
  CHECK(bitwise_equal(da.t(), db.t()));
  CHECK(!bitwise_equal(da.y(), db.y()));
}

TEST_CASE("demand with all instruments valid has no exclusion term") {
  DemandConfig cfg;
  cfg.n = 500;
  cfg.gamma = 5.0;
  const auto [data, truth] = generate_demand(cfg);
  for (Index i = 0; i < 50; ++i) {
    const VectorXd x = data.x().row(i).transpose();
    const VectorXd z = data.z().row(i).transpose();
    CHECK(truth.response(data.t()(i), x, z) == truth.structural(data.t()(i), x));
  }
}

TEST_CASE("generators are deterministic") {
  DemandConfig d;
  d.n = 1000;
  d.valid = {2, 3, 4};
  const auto [d1, t1] = generate_demand(d);
  const auto [d2, t2] = generate_demand(d);
  CHECK(bitwise_equal(d1.y(), d2.y()));
  CHECK(bitwise_equal(d1.z(), d2.z()));

  MRConfig m;
  m.n = 1000;
  m.pilot_size = 5000;
  const auto [m1, u1] = generate_mr(m);
  const auto [m2, u2] = generate_mr(m);
  CHECK(bitwise_equal(m1.y(), m2.y()));
  CHECK(bitwise_equal(m1.t(), m2.t()));
  CHECK(bitwise_equal(m1.x(), m2.x()));
}

TEST_CASE("truth reproduces zero-noise data exactly") {
  DemandConfig d;
  d.n = 2000;
  d.valid = valid_after_invalid(8, 3);
  d.zero_noise = true;
  const auto [dd, dt] = generate_demand(d);
  bool exact = true;
  for (Index i = 0; i < dd.n(); ++i) {
    exact = exact && dd.y()(i) == dt.response(dd.t()(i), dd.x().row(i).transpose(),
                                              dd.z().row(i).transpose());
  }
  CHECK(exact);

  MRConfig m;
  m.n = 2000;
  m.pilot_size = 5000;
  m.zero_noise = true;
  const auto [md, mt] = generate_mr(m);
  exact = true;
  for (Index i = 0; i < md.n(); ++i) {
    exact = exact && md.y()(i) == mt.response(md.t()(i), md.x().row(i).transpose(),
                                              md.z().row(i).transpose());
  }
  CHECK(exact);
}

TEST_CASE("demand moments at n = 100000") {
  DemandConfig cfg;
  cfg.n = 100000;
  cfg.valid = valid_after_invalid(8, 3);
  const auto [data, truth] = generate_demand(cfg);
  const double sd_time = std::sqrt(sample_var(data.x().col(0)));
  CHECK(std::abs(sd_time / (10.0 / std::sqrt(12.0)) - 1.0) < 0.02);

  // Recover nu and e from the data through the known parameters.
  const auto& p = truth.demand();
  VectorXd nu(data.n()), e(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const VectorXd x = data.x().row(i).transpose();
    const VectorXd z = data.z().row(i).transpose();
    const double raw_price = data.t()(i) * p.p_std + p.p_mu;
    nu(i) = raw_price - 25.0 - (z.dot(p.beta_zp) + 3.0) * psi(x(0));
    e(i) = (data.y()(i) - truth.response(data.t()(i), x, z)) * p.y_std;
  }
  CHECK(std::abs(sample_corr(nu, e) - cfg.rho) < 0.02);
  CHECK(std::abs(data.t().mean()) < 0.5);

  // One-hot types are roughly balanced.
  const VectorXd shares = data.x().rightCols(7).colwise().mean();
  for (Index c = 0; c < 7; ++c) CHECK(shares(c) == doctest::Approx(1.0 / 7).epsilon(0.05));
}

TEST_CASE("MR parameters") {
  MRConfig cfg;
  cfg.K = 20;
  cfg.n_valid = 12;
  cfg.pilot_size = 20000;
  const auto p = draw_mr_parameters(cfg);
  int nonzero = 0;
  for (int c = 0; c < 10; ++c) {
    if (p.gamma_xt(c) != 0.0) {
      ++nonzero;
      CHECK(p.gamma_xt(c) >= 0.2);
      CHECK(p.gamma_xt(c) < 0.5);
    }
  }
  CHECK(nonzero == 3);
  for (int j = 0; j < 20; ++j) {
    CHECK(p.p(j) >= 0.1);
    CHECK(p.p(j) < 0.9);
    if (j < 8) {
      CHECK(p.delta(j) > 0.0);
      CHECK(p.delta(j) ==
            doctest::Approx(8 * std::sqrt(0.1) / (20 * p.sigma_zy) * p.nu_y(j)).epsilon(1e-12));
    } else {
      CHECK(p.delta(j) == 0.0);
    }
    CHECK(p.alpha(j) == doctest::Approx(std::sqrt(0.1) / p.sigma_zx * p.nu_x(j)).epsilon(1e-12));
  }
}

TEST_CASE("MR effect values lie on the tenth grid") {
  MRConfig cfg;
  cfg.n = 5000;
  cfg.pilot_size = 5000;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.param_seed = seed;
    const auto [data, truth] = generate_mr(cfg);
    int central = 0;
    bool on_grid = true;
    bool bounded = true;
    for (Index i = 0; i < data.n(); ++i) {
      const double tenths = truth.slope(data.x().row(i).transpose()) * 10.0;
      on_grid = on_grid && std::abs(tenths - std::round(tenths)) < 1e-9;
      // Three weights below 0.5 times |x| <= 0.5 bound |x' gamma| by 0.75.
      bounded = bounded && std::abs(tenths) <= 8.0 + 1e-9;
      if (std::abs(tenths) <= 3.0 + 1e-9) ++central;
    }
    CHECK(on_grid);
    CHECK(bounded);
    CHECK(central >= 0.8 * static_cast<double>(data.n()));
  }
}

TEST_CASE("MR with every instrument valid has no direct effects") {
  MRConfig cfg;
  cfg.n = 500;
  cfg.K = 10;
  cfg.n_valid = 10;
  cfg.pilot_size = 5000;
  const auto [data, truth] = generate_mr(cfg);
  CHECK(truth.mr().delta.isZero(0.0));
  for (Index i = 0; i < 20; ++i) {
    const VectorXd x = data.x().row(i).transpose();
    CHECK(truth.response(data.t()(i), x, data.z().row(i).transpose()) ==
          truth.structural(data.t()(i), x));
  }
}

TEST_CASE("MR moments at n = 100000") {
  MRConfig cfg;
  cfg.n = 100000;
  cfg.K = 20;
  cfg.n_valid = 10;
  const auto [data, truth] = generate_mr(cfg);
  CHECK(sample_var(data.t()) >= 0.98);
  CHECK(sample_var(data.t()) <= 1.02);
  CHECK(sample_var(data.y()) >= 0.98);
  CHECK(sample_var(data.y()) <= 1.02);
  const auto& p = truth.mr();
  const double share = sample_var(data.z() * p.alpha) / sample_var(data.t());
  CHECK(std::abs(share / 0.1 - 1.0) < 0.1);
  for (int j = 0; j < cfg.K; ++j) {
    const double mean = data.z().col(j).mean();
    const double se = std::sqrt(2.0 * p.p(j) * (1.0 - p.p(j)) / static_cast<double>(cfg.n));
    CHECK(std::abs(mean - 2.0 * p.p(j)) < 3.0 * se + 1e-12);
  }
}
