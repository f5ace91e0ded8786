#include "modeiv/modal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "modeiv/csv_writer.hpp"
#include "modeiv/error.hpp"
#include "modeiv/random.hpp"

namespace modeiv {

int default_v(Index k) { return std::max(2, static_cast<int>((k + 1) / 2)); }

ModalInterval shortest_interval(std::span<const double> values, int V) {
  const int k = static_cast<int>(values.size());
  if (V < 2 || V > k) {
    throw ConfigError("V = " + std::to_string(V) + " outside [2, " + std::to_string(k) + "]");
  }
  for (int i = 0; i < k; ++i) {
    if (!std::isfinite(values[static_cast<std::size_t>(i)])) {
      throw ConfigError("estimate " + std::to_string(i) + " is not finite");
    }
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  int best = 0;
  double best_width = sorted[static_cast<std::size_t>(V - 1)] - sorted[0];
  for (int s = 1; s + V <= k; ++s) {
    const double w = sorted[static_cast<std::size_t>(s + V - 1)] - sorted[static_cast<std::size_t>(s)];
    if (w < best_width) {
      best_width = w;
      best = s;
    }
  }
  ModalInterval out;
  out.lower = sorted[static_cast<std::size_t>(best)];
  out.upper = sorted[static_cast<std::size_t>(best + V - 1)];
  for (int i = 0; i < k; ++i) {
    const double v = values[static_cast<std::size_t>(i)];
    if (v >= out.lower && v <= out.upper) out.members.push_back(i);
  }
  return out;
}

double aggregate(std::span<const double> values, const ModalInterval& interval,
                 const AggregationConfig& config) {
  if (config.weighting == Weighting::uniform) {
    double sum = 0.0;
    for (int i : interval.members) sum += values[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(interval.members.size());
  }
  if (config.weights.size() != values.size()) {
    throw ConfigError("supplied weights have length " + std::to_string(config.weights.size()) +
                      ", expected " + std::to_string(values.size()));
  }
  double total = 0.0;
  double sum = 0.0;
  for (int i : interval.members) {
    const double w = config.weights[static_cast<std::size_t>(i)];
    total += w;
    sum += w * values[static_cast<std::size_t>(i)];
  }
  if (!(total > 0.0)) throw DegenerateWeightsError("all modal-interval members have zero weight");
  return sum / total;
}

double aggregate(std::span<const double> values, const AggregationConfig& config) {
  for (double w : config.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weights must be finite and non-negative");
  }
  return aggregate(values, shortest_interval(values, config.V), config);
}

EnsemblePredictor::EnsemblePredictor(std::vector<FittedEstimator> estimators,
                                     AggregationConfig config)
    : estimators_(std::move(estimators)), config_(std::move(config)) {
  const Index k = size();
  if (config_.V < 2 || config_.V > k) {
    throw ConfigError("V = " + std::to_string(config_.V) + " outside [2, " + std::to_string(k) +
                      "] for an ensemble of " + std::to_string(k));
  }
  if (config_.weighting == Weighting::supplied) {
    if (static_cast<Index>(config_.weights.size()) != k) {
      throw ConfigError("supplied weights must have one entry per estimator");
    }
    for (double w : config_.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weights must be finite and non-negative");
    }
  }
}

std::vector<double> EnsemblePredictor::member_predictions(const TestPoint& point) const {
  std::vector<double> out;
  out.reserve(estimators_.size());
  for (const auto& e : estimators_) out.push_back(e.predict(point));
  return out;
}

ModalPrediction predict_mode(const EnsemblePredictor& predictor, const TestPoint& point) {
  const std::vector<double> values = predictor.member_predictions(point);
  ModalPrediction out;
  out.interval = shortest_interval(values, predictor.config().V);
  out.value = aggregate(values, out.interval, predictor.config());
  return out;
}

std::vector<ModalPrediction> predict_curve(const EnsemblePredictor& predictor,
                                           std::span<const TestPoint> grid) {
  std::vector<ModalPrediction> out;
  out.reserve(grid.size());
  for (const auto& point : grid) out.push_back(predict_mode(predictor, point));
  return out;
}

std::string modal_diagnostics_csv(std::span<const TestPoint> grid,
                                  std::span<const ModalPrediction> predictions) {
  if (grid.size() != predictions.size()) {
    throw DimensionError("grid and prediction counts differ");
  }
  const Index d = grid.empty() ? 0 : grid.front().x.size();
  std::string out = "t";
  for (Index c = 0; c < d; ++c) out += ",x_" + std::to_string(c + 1);
  out += ",f_mode,lower,upper,members\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& p = grid[i];
    if (p.x.size() != d) throw DimensionError("grid points have unequal covariate lengths");
    const auto& m = predictions[i];
    out += format_double(p.t);
    for (Index c = 0; c < d; ++c) out += "," + format_double(p.x(c));
    out += "," + format_double(m.value) + "," + format_double(m.interval.lower) + "," +
           format_double(m.interval.upper) + ",";
    for (std::size_t j = 0; j < m.interval.members.size(); ++j) {
      if (j > 0) out += ';';
      out += std::to_string(m.interval.members[j] + 1);
    }
    out += '\n';
  }
  return out;
}

std::vector<double> simulate_theorem(const SyntheticEstimatorSpec& spec,
                                     const AggregationConfig& config, int replicates) {
  const std::size_t k = spec.limits.size();
  if (k < 2) throw ConfigError("synthetic ensemble needs at least two estimators");
  if (spec.sds.size() != k) throw ConfigError("limits and sds must have equal length");
  if (!(spec.n > 0.0)) throw ConfigError("effective sample size must be positive");
  if (replicates < 1) throw ConfigError("replicates must be positive");
  for (double s : spec.sds) {
    if (!(s >= 0.0)) throw ConfigError("sds must be non-negative");
  }
  std::map<double, int> multiplicity;
  int largest = 0;
  for (double b : spec.limits) largest = std::max(largest, ++multiplicity[b]);
  if (config.V > largest) {
    throw PreconditionError("V = " + std::to_string(config.V) +
                            " exceeds the largest group of shared limits (" +
                            std::to_string(largest) + ")");
  }

  Rng rng(spec.seed, "theorem");
  const double scale = 1.0 / std::sqrt(spec.n);
  std::vector<double> draws(k);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(replicates));
  for (int r = 0; r < replicates; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      draws[j] = spec.limits[j] + spec.sds[j] * rng.normal() * scale;
    }
    out.push_back(aggregate(draws, config));
  }
  return out;
}

}  // namespace modeiv
