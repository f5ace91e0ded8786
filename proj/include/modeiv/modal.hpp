#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modeiv/estimators.hpp"

namespace modeiv {

enum class Weighting { uniform, supplied };

/// Default lower bound on the number of valid instruments: ceil(k / 2),
/// never below 2.
int default_v(Index k);

struct AggregationConfig {
  int V = 2;
  Weighting weighting = Weighting::uniform;
  /// One non-negative weight per estimator when weighting is `supplied`.
  std::vector<double> weights;
};

struct ModalInterval {
  double lower = 0.0;
  double upper = 0.0;
  /// Indices of every value inside the closed interval, ascending.
  std::vector<int> members;

  double width() const { return upper - lower; }
};

/// Smallest closed interval containing V of the values. Equal widths resolve
/// to the window with the smallest lower endpoint.
ModalInterval shortest_interval(std::span<const double> values, int V);

/// Mean of the values inside the modal interval, uniform or with the
/// supplied weights renormalized over the members.
double aggregate(std::span<const double> values, const AggregationConfig& config);
double aggregate(std::span<const double> values, const ModalInterval& interval,
                 const AggregationConfig& config);

struct ModalPrediction {
  double value = 0.0;
  ModalInterval interval;
};

class EnsemblePredictor {
 public:
  EnsemblePredictor(std::vector<FittedEstimator> estimators, AggregationConfig config);

  const std::vector<FittedEstimator>& estimators() const { return estimators_; }
  const AggregationConfig& config() const { return config_; }
  Index size() const { return static_cast<Index>(estimators_.size()); }

  /// Every member's prediction at the point, in ensemble order.
  std::vector<double> member_predictions(const TestPoint& point) const;

 private:
  std::vector<FittedEstimator> estimators_;
  AggregationConfig config_;
};

ModalPrediction predict_mode(const EnsemblePredictor& predictor, const TestPoint& point);
std::vector<ModalPrediction> predict_curve(const EnsemblePredictor& predictor,
                                           std::span<const TestPoint> grid);

/// Diagnostic table with columns t, x_1..x_d, f_mode, lower, upper, members;
/// members is a ';'-separated list of 1-based estimator positions.
std::string modal_diagnostics_csv(std::span<const TestPoint> grid,
                                  std::span<const ModalPrediction> predictions);

/// Per-instrument limits and spreads for Monte Carlo draws of
/// beta_hat_j = beta_j + sigma_j * N(0, 1) / sqrt(n).
struct SyntheticEstimatorSpec {
  std::vector<double> limits;
  std::vector<double> sds;
  double n = 1.0;
  std::uint64_t seed = 0;
};

/// Modal estimate of each replicate. Requires V to be at most the largest
/// number of estimators sharing one limit.
std::vector<double> simulate_theorem(const SyntheticEstimatorSpec& spec,
                                     const AggregationConfig& config, int replicates);

}  // namespace modeiv
