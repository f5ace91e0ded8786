#include "modeiv/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "modeiv/error.hpp"

namespace modeiv {

void GridSpec::validate() const {
  if (n_points < 2) throw ConfigError("grid needs at least 2 points");
  if (x_sample < 1) throw ConfigError("grid needs at least 1 covariate row");
  if (bounds) {
    if (!(bounds->second > bounds->first)) throw ConfigError("grid bounds must satisfy lo < hi");
  } else if (!(p_lo >= 0.0 && p_lo < p_hi && p_hi <= 100.0)) {
    throw ConfigError("grid percentiles must satisfy 0 <= lo < hi <= 100");
  }
}

TestPoint EvaluationGrid::point(Index p) const {
  const Index rows = x.rows();
  const Index r = p % rows;
  return TestPoint{treatments(p / rows), x.row(r).transpose(), VectorXd(z.row(r).transpose())};
}

std::vector<TestPoint> EvaluationGrid::points() const {
  std::vector<TestPoint> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Index p = 0; p < size(); ++p) out.push_back(point(p));
  return out;
}

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw ConfigError("percentile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

EvaluationGrid build_grid(const GridSpec& spec, const VectorXd& train_treatment,
                          const Dataset& held_out) {
  spec.validate();
  double lo = 0.0, hi = 0.0;
  if (spec.bounds) {
    std::tie(lo, hi) = *spec.bounds;
  } else {
    const std::span<const double> t(train_treatment.data(), static_cast<std::size_t>(train_treatment.size()));
    lo = percentile(t, spec.p_lo);
    hi = percentile(t, spec.p_hi);
  }
  EvaluationGrid grid;
  grid.treatments = VectorXd::LinSpaced(spec.n_points, lo, hi);
  const Index rows = std::min(spec.x_sample, held_out.n());
  grid.x = held_out.x().topRows(rows);
  grid.z = held_out.z().topRows(rows);
  return grid;
}

double truth_value(const TruthOracle& truth, const TestPoint& point, TruthTarget target) {
  if (target == TruthTarget::structural) return truth.structural(point.t, point.x);
  if (!point.z) throw ConfigError("response target needs instrument values at each point");
  return truth.response(point.t, point.x, *point.z);
}

double mse_on_grid(const EffectFunction& predict, const TruthOracle& truth,
                   const EvaluationGrid& grid, TruthTarget target) {
  const Index size = grid.size();
  if (size == 0) throw ConfigError("empty evaluation grid");
  double sum = 0.0;
  for (Index p = 0; p < size; ++p) {
    const TestPoint point = grid.point(p);
    const double diff = predict(point) - truth_value(truth, point, target);
    sum += diff * diff;
  }
  return sum / static_cast<double>(size);
}

double cate_abs_bias(const EffectFunction& predict,
                     const std::function<double(const VectorXd&)>& truth_slope,
                     const MatrixXd& x_rows, std::pair<double, double> t_probe) {
  const auto [t1, t2] = t_probe;
  if (t1 == t2) throw ConfigError("CATE probe treatments must differ");
  if (x_rows.rows() == 0) throw ConfigError("CATE needs at least one covariate row");
  double sum = 0.0;
  for (Index r = 0; r < x_rows.rows(); ++r) {
    const VectorXd x = x_rows.row(r).transpose();
    const double slope = (predict(TestPoint{t2, x, std::nullopt}) -
                          predict(TestPoint{t1, x, std::nullopt})) / (t2 - t1);
    sum += std::abs(slope - truth_slope(x));
  }
  return sum / static_cast<double>(x_rows.rows());
}

ConfidenceInterval confidence_interval(std::span<const double> samples, double level) {
  const std::size_t n = samples.size();
  if (n < 2) throw ConfigError("confidence interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  return {mean, q * sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace modeiv
