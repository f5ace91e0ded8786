#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "modeiv/error.hpp"
#include "modeiv/modal.hpp"
#include "modeiv/random.hpp"

using namespace modeiv;

namespace {

// Width of the narrowest V-subset, by enumerating every subset.
double brute_force_width(const std::vector<double>& v, int V) {
  const int k = static_cast<int>(v.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    if (__builtin_popcount(mask) != V) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = 0; i < k; ++i) {
      if (mask & (1u << i)) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
      }
    }
    best = std::min(best, hi - lo);
  }
  return best;
}

std::vector<double> random_values(Rng& rng, int k) {
  std::vector<double> v(static_cast<std::size_t>(k));
  for (auto& x : v) {
    // Coarse grid so ties and coincident values occur often.
    x = rng.bernoulli(0.5) ? std::round(rng.uniform(-5, 5) * 2) / 2 : rng.normal() * 3;
  }
  return v;
}

// Linear estimator that returns `value` everywhere (no covariates).
FittedEstimator constant_estimator(double value) {
  FittedEstimator::Parts parts;
  parts.spec.kind = EstimatorKind::linear_tsls;
  parts.instruments = {0};
  parts.covariates = 0;
  parts.instrument_count = 1;
  parts.covariate_basis = CovariateBasis(0, std::nullopt, UnivariateBasis(), false);
  parts.first_stage = MatrixXd::Zero(2, 1);
  parts.second_stage = VectorXd(2);
  parts.second_stage << value, 0.0;
  return FittedEstimator(parts);
}

// Estimator with prediction a + b t.
FittedEstimator line_estimator(double a, double b) {
  FittedEstimator::Parts p;
  p.spec.kind = EstimatorKind::linear_tsls;
  p.instruments = {0};
  p.instrument_count = 1;
  p.covariate_basis = CovariateBasis(0, std::nullopt, UnivariateBasis(), false);
  p.first_stage = MatrixXd::Zero(2, 1);
  p.second_stage = VectorXd(2);
  p.second_stage << a, b;
  return FittedEstimator(p);
}

std::vector<int> iota_members(int k) {
  std::vector<int> v(static_cast<std::size_t>(k));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("default V is half the ensemble, at least two") {
  CHECK(default_v(8) == 4);
  CHECK(default_v(9) == 5);
  CHECK(default_v(3) == 2);
  CHECK(default_v(2) == 2);
  CHECK(default_v(20) == 10);
}

TEST_CASE("shortest interval worked examples") {
  const std::vector<double> a{1.0, 1.05, 1.1, 5.0, 9.0};
  const auto ia = shortest_interval(a, 3);
  CHECK(ia.lower == 1.0);
  CHECK(ia.upper == 1.1);
  CHECK(ia.members == std::vector<int>{0, 1, 2});
  CHECK(brute_force_width(a, 3) == doctest::Approx(ia.width()));

  const std::vector<double> b{2, 2, 2, 2};
  const auto ib = shortest_interval(b, 2);
  CHECK(ib.lower == 2.0);
  CHECK(ib.upper == 2.0);
  CHECK(ib.members == std::vector<int>{0, 1, 2, 3});

  const std::vector<double> c{3, -1, 7, 0.5};
  const auto ic = shortest_interval(c, 4);
  CHECK(ic.lower == -1);
  CHECK(ic.upper == 7);
  CHECK(ic.members == iota_members(4));
}

TEST_CASE("equal-width windows resolve to the leftmost") {
  const std::vector<double> v{4.0, 0.0, 1.0, 3.0};
  const auto iv = shortest_interval(v, 2);
  CHECK(iv.lower == 0.0);
  CHECK(iv.upper == 1.0);
  CHECK(iv.members == std::vector<int>{1, 2});
}

TEST_CASE("shortest interval rejects bad input") {
  const std::vector<double> v{1, 2, 3};
  CHECK_THROWS_AS(shortest_interval(v, 1), ConfigError);
  CHECK_THROWS_AS(shortest_interval(v, 4), ConfigError);
  const std::vector<double> bad{1, std::nan(""), 3};
  CHECK_THROWS_AS(shortest_interval(bad, 2), ConfigError);
}

TEST_CASE("shortest interval matches the subset oracle") {
  Rng rng(1, "oracle");
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng.index(10));
    const int V = 2 + static_cast<int>(rng.index(static_cast<std::uint64_t>(k - 1)));
    const auto v = random_values(rng, k);
    const auto iv = shortest_interval(v, V);
    REQUIRE(iv.lower <= iv.upper);
    CHECK(iv.width() == brute_force_width(v, V));
    CHECK(static_cast<int>(iv.members.size()) >= V);
    for (int i = 0; i < k; ++i) {
      const bool inside = v[i] >= iv.lower && v[i] <= iv.upper;
      const bool listed = std::find(iv.members.begin(), iv.members.end(), i) != iv.members.end();
      CHECK(inside == listed);
    }
  }
}

TEST_CASE("translation, scale and permutation equivariance") {
  Rng rng(2, "equivariance");
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 3 + static_cast<int>(rng.index(10));
    const int V = 2 + static_cast<int>(rng.index(static_cast<std::uint64_t>(k - 1)));
    // Dyadic values keep shifted and scaled arithmetic exact.
    std::vector<double> v(static_cast<std::size_t>(k));
    for (auto& x : v) x = static_cast<double>(static_cast<int>(rng.index(64)) - 32) / 8.0;
    const auto base = shortest_interval(v, V);

    std::vector<double> shifted(v), scaled(v);
    for (auto& x : shifted) x += 2.5;
    for (auto& x : scaled) x *= 4.0;
    const auto s = shortest_interval(shifted, V);
    CHECK(s.lower == base.lower + 2.5);
    CHECK(s.upper == base.upper + 2.5);
    CHECK(s.members == base.members);
    const auto c = shortest_interval(scaled, V);
    CHECK(c.lower == base.lower * 4.0);
    CHECK(c.upper == base.upper * 4.0);
    CHECK(c.members == base.members);

    std::vector<int> perm = iota_members(k);
    rng.shuffle(std::span<int>(perm));
    std::vector<double> permuted(v.size());
    for (int i = 0; i < k; ++i) permuted[i] = v[perm[i]];
    const auto p = shortest_interval(permuted, V);
    std::vector<int> mapped;
    for (int i : p.members) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == base.members);
    const AggregationConfig cfg{V};
    CHECK(aggregate(permuted, cfg) == doctest::Approx(aggregate(v, cfg)).epsilon(1e-14));
  }
}

TEST_CASE("interval width is non-decreasing in V") {
  Rng rng(3, "monotone");
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 3 + static_cast<int>(rng.index(12));
    const auto v = random_values(rng, k);
    double prev = -1.0;
    for (int V = 2; V <= k; ++V) {
      const double w = shortest_interval(v, V).width();
      CHECK(w >= prev);
      prev = w;
    }
  }
}

TEST_CASE("aggregate uniform and supplied weights") {
  const std::vector<double> v{1.0, 1.05, 1.1, 5.0, 9.0};
  CHECK(aggregate(v, AggregationConfig{3}) == doctest::Approx(1.05));

  const std::vector<double> same(6, 2.75);
  for (int V = 2; V <= 6; ++V) CHECK(aggregate(same, AggregationConfig{V}) == 2.75);

  const std::vector<double> three{1.0, 2.0, 1.5};
  AggregationConfig w{3, Weighting::supplied, {0.5, 0.5, 0.0}};
  CHECK(aggregate(three, w) == doctest::Approx(1.5));
  w.weights = {1.0, 3.0, 0.0};
  CHECK(aggregate(three, w) == doctest::Approx(1.75));
  w.weights = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(aggregate(three, w), DegenerateWeightsError);
  w.weights = {1.0, -1.0, 0.0};
  CHECK_THROWS_AS(aggregate(three, w), ConfigError);
  w.weights = {1.0};
  CHECK_THROWS_AS(aggregate(three, w), ConfigError);
}

TEST_CASE("predict_mode over fitted estimators") {
  std::vector<FittedEstimator> ests;
  for (double v : {1.0, 1.02, 0.98, 4.0, -3.0}) ests.push_back(constant_estimator(v));
  const EnsemblePredictor pred(ests, AggregationConfig{3});
  const TestPoint point{0.3, VectorXd(0), std::nullopt};
  const auto m = predict_mode(pred, point);
  CHECK(m.value == doctest::Approx(1.0));
  CHECK(m.interval.members == std::vector<int>{0, 1, 2});

  std::vector<FittedEstimator> same(4, line_estimator(0.5, 2.0));
  const EnsemblePredictor all_same(same, AggregationConfig{2});
  CHECK(predict_mode(all_same, point).value == same[0].predict(point));

  CHECK_THROWS_AS(EnsemblePredictor(ests, AggregationConfig{6}), ConfigError);
  CHECK_THROWS_AS(EnsemblePredictor(ests, AggregationConfig{3, Weighting::supplied, {1, 1}}),
                  ConfigError);
}

TEST_CASE("modal membership is recomputed at every point") {
  // A flat pair of width 0.1 and a diverging pair of width 0.02 |t|.
  std::vector<FittedEstimator> ests{line_estimator(0.0, 0.0), line_estimator(0.1, 0.0),
                                    line_estimator(-5.0, 1.0), line_estimator(-5.0, 1.02)};
  const EnsemblePredictor pred(ests, AggregationConfig{2});
  const auto low = predict_mode(pred, TestPoint{0.0, VectorXd(0), std::nullopt});
  const auto high = predict_mode(pred, TestPoint{10.0, VectorXd(0), std::nullopt});
  CHECK(low.interval.members == std::vector<int>{2, 3});
  CHECK(high.interval.members == std::vector<int>{0, 1});
}

TEST_CASE("predict_curve is elementwise predict_mode") {
  Rng rng(4, "curve");
  std::vector<FittedEstimator> ests;
  for (int j = 0; j < 7; ++j) ests.push_back(line_estimator(rng.normal(), rng.normal()));
  const EnsemblePredictor pred(ests, AggregationConfig{4});

  std::vector<TestPoint> grid;
  for (int i = 0; i < 1000; ++i) grid.push_back({rng.uniform(-3, 3), VectorXd(0), std::nullopt});
  const auto curve = predict_curve(pred, grid);
  REQUIRE(curve.size() == grid.size());
  bool same = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto one = predict_mode(pred, grid[i]);
    same = same && one.value == curve[i].value && one.interval.members == curve[i].interval.members;
  }
  CHECK(same);

  const std::vector<TestPoint> single{grid[5]};
  CHECK(predict_curve(pred, single)[0].value == predict_mode(pred, grid[5]).value);

  std::vector<TestPoint> reversed(grid.rbegin(), grid.rend());
  const auto rev = predict_curve(pred, reversed);
  bool permuted = true;
  for (std::size_t i = 0; i < grid.size(); ++i) permuted = permuted && rev[i].value == curve[grid.size() - 1 - i].value;
  CHECK(permuted);
}

TEST_CASE("modal diagnostics table") {
  std::vector<FittedEstimator> ests;
  for (double v : {1.0, 1.02, 0.98, 4.0}) ests.push_back(constant_estimator(v));
  const EnsemblePredictor pred(ests, AggregationConfig{3});
  const std::vector<TestPoint> grid{{0.5, VectorXd(0), std::nullopt}};
  const auto curve = predict_curve(pred, grid);
  const auto csv = modal_diagnostics_csv(grid, curve);
  CHECK(csv.rfind("t,f_mode,lower,upper,members\n", 0) == 0);
  CHECK(csv.find(",0.98,1.02,1;2;3\n") != std::string::npos);
}

TEST_CASE("synthetic estimators: zero noise gives the valid limit") {
  SyntheticEstimatorSpec spec{{1, 1, 1, 1, 1, 2, 3, 4, 5}, std::vector<double>(9, 0.0), 100.0, 0};
  const auto est = simulate_theorem(spec, AggregationConfig{5}, 10);
  for (double e : est) CHECK(e == 1.0);
  CHECK_THROWS_AS(simulate_theorem(spec, AggregationConfig{6}, 10), PreconditionError);
}

TEST_CASE("synthetic estimators converge at the root-n rate") {
  const std::vector<double> limits{1, 1, 1, 1, 1, 2, 3, 4, 5};
  const std::vector<double> sds(9, 1.0);
  const auto moments = [&](double n) {
    const auto est = simulate_theorem({limits, sds, n, 7}, AggregationConfig{5}, 500);
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= static_cast<double>(est.size());
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    return std::pair{mean, var / static_cast<double>(est.size() - 1)};
  };
  const auto [m1, v1] = moments(1e6);
  const auto [m4, v4] = moments(4e6);
  CHECK(std::abs(m1 - 1.0) < 0.01);
  CHECK(v4 / v1 >= 0.15);
  CHECK(v4 / v1 <= 0.4);
}
