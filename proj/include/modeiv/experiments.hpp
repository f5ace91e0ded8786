#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modeiv/estimators.hpp"
#include "modeiv/evaluation.hpp"
#include "modeiv/modal.hpp"
#include "modeiv/simulators.hpp"

namespace modeiv {

struct Method {
  enum class Kind { modeiv, mean_ensemble, naive_all, oracle_valid, single };
  Kind kind = Kind::modeiv;
  /// modeiv only; 0 selects default_v of the ensemble size.
  int V = 0;
  /// single only; 0-based instrument column.
  int instrument = -1;

  std::string name() const;
  /// name() plus the V or instrument argument, e.g. modeiv(4), single(3).
  std::string label() const;
};

/// Accepts modeiv, modeiv(4), modeiv:4, mean, mean_ensemble, naive,
/// naive_all, oracle, oracle_valid, single(3), single:3 (1-based).
Method parse_method(std::string_view text);
std::vector<Method> parse_methods(std::string_view comma_separated);

struct ComparisonConfig {
  EstimatorSpec spec;
  Conditioning conditioning = Conditioning::independent;
  bool skip_failed = false;
  /// The seed field is replaced by the run seed.
  SplitSpec split;
  GridSpec grid;
  TruthTarget target = TruthTarget::structural;
  double cate_lo_pct = 25.0;
  double cate_hi_pct = 75.0;
};

struct MethodResult {
  Method method;
  /// V actually used (modeiv), 0 otherwise.
  int V = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double cate_abs_bias = 0.0;
  double runtime_seconds = 0.0;
};

/// One train/held-out split and evaluation grid shared by every method.
/// Fits are made lazily and cached, so sweeping V reuses one ensemble.
class Comparison {
 public:
  Comparison(const Dataset& data, const TruthOracle& truth, ComparisonConfig config,
             std::uint64_t seed);

  const Dataset& train() const { return train_; }
  const Dataset& held_out() const { return held_out_; }
  const EvaluationGrid& grid() const { return grid_; }
  std::pair<double, double> cate_probe() const { return probe_; }
  const ComparisonConfig& config() const { return config_; }

  const EnsembleFit& ensemble();
  /// Use previously fitted members instead of fitting on the train split.
  void set_ensemble(std::vector<FittedEstimator> estimators);

  MethodResult evaluate(const Method& method);
  std::vector<MethodResult> evaluate(const std::vector<Method>& methods);

 private:
  struct Scores {
    double mse = 0.0;
    double cate = 0.0;
  };
  Scores score_single(const FittedEstimator& estimator) const;
  void prepare_members();

  const TruthOracle& truth_;
  ComparisonConfig config_;
  std::uint64_t seed_;
  Dataset train_;
  Dataset held_out_;
  EvaluationGrid grid_;
  std::pair<double, double> probe_;
  VectorXd truth_grid_;
  VectorXd truth_slope_;
  std::optional<EnsembleFit> ensemble_;
  double ensemble_seconds_ = 0.0;
  /// Member predictions: grid points x members, and probe rows x members.
  MatrixXd member_grid_;
  MatrixXd member_t1_;
  MatrixXd member_t2_;
  bool members_ready_ = false;
};

std::vector<MethodResult> run_comparison(const Dataset& data, const TruthOracle& truth,
                                         const std::vector<Method>& methods,
                                         const ComparisonConfig& config, std::uint64_t seed);

/// One modeiv result per V from a single fitted ensemble.
std::vector<MethodResult> sensitivity_sweep(const Dataset& data, const TruthOracle& truth,
                                            const std::vector<int>& V_range,
                                            const ComparisonConfig& config, std::uint64_t seed);

struct ReportRow {
  std::string method;
  std::string metric;
  double mean = 0.0;
  /// Present only with at least two replicates.
  std::optional<double> ci_half_width;
  int n_replicates = 0;
};

/// Mean and Student-t half width per method label for mse and cate_abs_bias.
std::vector<ReportRow> summarize(const std::vector<MethodResult>& results);

/// Context columns of the results CSV.
struct ResultContext {
  std::optional<double> gamma;
  std::optional<int> n_invalid;
};

std::string results_csv_header();
std::string results_csv_rows(const std::vector<MethodResult>& results, const ResultContext& context);
std::string report_csv(const std::vector<ReportRow>& rows);

/// Cost-reduced default estimator for each simulator.
EstimatorSpec demand_estimator_spec();
EstimatorSpec mr_estimator_spec();

struct ReproduceCommon {
  std::uint64_t seed = 0;
  int seeds = 5;
  int jobs = 1;
  std::filesystem::path outdir = "results";
  GridSpec grid;
  SplitSpec split;
  std::optional<EstimatorSpec> spec;
  Conditioning conditioning = Conditioning::independent;
  bool skip_failed = false;
};

struct DemandBiasOptions {
  Index n = 10000;
  int k = 8;
  std::vector<double> gammas{0.0, 0.5, 1.0};
  std::vector<int> n_invalid{1, 2, 3};
  int V = 0;
  double rho = 0.5;
};

struct MRTableOptions {
  Index n = 50000;
  int K = 20;
  std::vector<double> valid_fracs{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int V = 0;
  double rho = 0.5;
};

struct VSensitivityOptions {
  Index n = 10000;
  int k = 8;
  std::vector<int> n_invalid{1, 2, 3};
  double gamma = 1.0;
  double rho = 0.5;
};

struct TheoremOptions {
  std::vector<double> limits{1, 1, 1, 1, 1, 2, 3, 4, 5};
  double sd = 1.0;
  int V = 5;
  std::vector<double> ns{1e2, 1e3, 1e4, 1e5, 1e6};
  int replicates = 500;
};

/// Each driver writes <outdir>/<experiment>/<seed>/results.csv per
/// replicate plus report.csv and plot_data.csv under <outdir>/<experiment>.
void reproduce_demand_bias(const ReproduceCommon& common, const DemandBiasOptions& options);
void reproduce_mr_table(const ReproduceCommon& common, const MRTableOptions& options);
void reproduce_v_sensitivity(const ReproduceCommon& common, const VSensitivityOptions& options);
void reproduce_theorem(const ReproduceCommon& common, const TheoremOptions& options);

struct TheoremRow {
  double n = 0.0;
  int replicates = 0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

TheoremRow theorem_row(const std::vector<double>& estimates, double n);

}  // namespace modeiv
