#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "modeiv/dataset.hpp"
#include "modeiv/simulators.hpp"

namespace modeiv {

/// Treatment grid crossed with held-out covariate rows.
struct GridSpec {
  Index n_points = 1000;
  double p_lo = 2.5;
  double p_hi = 97.5;
  /// Overrides the percentile bounds when set.
  std::optional<std::pair<double, double>> bounds;
  Index x_sample = 200;

  void validate() const;
};

struct EvaluationGrid {
  VectorXd treatments;
  /// Held-out rows crossed with every treatment value.
  MatrixXd x;
  MatrixXd z;

  Index size() const { return treatments.size() * x.rows(); }
  /// Point p enumerates treatments in the outer loop and rows in the inner.
  TestPoint point(Index p) const;
  std::vector<TestPoint> points() const;
};

/// Percentile with linear interpolation between order statistics.
double percentile(std::span<const double> values, double pct);

/// Grid bounds come from `train_treatment`; rows are the first
/// `x_sample` rows of `held_out`.
EvaluationGrid build_grid(const GridSpec& spec, const VectorXd& train_treatment,
                          const Dataset& held_out);

using EffectFunction = std::function<double(const TestPoint&)>;

enum class TruthTarget {
  /// Effect averaged over instrument direct effects.
  structural,
  /// Noiseless outcome including each row's direct instrument effects.
  response,
};

double truth_value(const TruthOracle& truth, const TestPoint& point, TruthTarget target);

double mse_on_grid(const EffectFunction& predict, const TruthOracle& truth,
                   const EvaluationGrid& grid, TruthTarget target = TruthTarget::structural);

/// Mean over rows of |(f(t2, x) - f(t1, x)) / (t2 - t1) - slope(x)|.
double cate_abs_bias(const EffectFunction& predict,
                     const std::function<double(const VectorXd&)>& truth_slope,
                     const MatrixXd& x_rows, std::pair<double, double> t_probe);

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +- t_{(1+level)/2, n-1} * sd / sqrt(n).
ConfidenceInterval confidence_interval(std::span<const double> samples, double level = 0.95);

}  // namespace modeiv
