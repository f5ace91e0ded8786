#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "modeiv/basis.hpp"
#include "modeiv/dataset.hpp"

namespace modeiv {

enum class EstimatorKind { linear_tsls, cond_linear, sieve };
enum class Conditioning { independent, leave_one_out };

/// How cond_linear forms its second-stage regressors t * phi(x).
enum class SecondStage {
  /// Multiply phi(x) by the first-stage prediction t_hat.
  plug_in,
  /// Project every column of t * phi(x) on [phi, controls, z (x) phi].
  projected,
  /// Keep t * phi(x) as regressors and use t_hat * phi(x) as their
  /// instruments (just-identified IV).
  instrumented,
};

std::string to_string(EstimatorKind kind);
std::string to_string(Conditioning conditioning);
std::string to_string(SecondStage second_stage);
EstimatorKind parse_estimator_kind(std::string_view text);
Conditioning parse_conditioning(std::string_view text);
SecondStage parse_second_stage(std::string_view text);

inline constexpr double kDefaultWeakInstrumentF = 10.0;
/// Default ridge weight per training row for cond_linear and sieve.
inline constexpr double kDefaultRidgePerRow = 1e-6;

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::cond_linear;
  BasisSpec basis;
  /// Unset means 0 for linear_tsls and ridge_per_row * n otherwise.
  std::optional<double> ridge_lambda;
  double ridge_per_row = kDefaultRidgePerRow;
  double weak_instrument_threshold = kDefaultWeakInstrumentF;
  /// cond_linear only.
  SecondStage second_stage = SecondStage::plug_in;

  double resolved_ridge(Index n_train) const;
};

struct FitDiagnostics {
  /// Smallest first-stage F over the endogenous columns.
  double first_stage_f = 0.0;
  double first_stage_partial_r2 = 0.0;
  double first_stage_residual_variance = 0.0;
  /// Variance of y - f(t, x) on the training rows.
  double second_stage_residual_variance = 0.0;
  /// Variance of the instrument-driven part of the fitted treatment.
  double instrument_strength = 0.0;
  Index n_train = 0;
  double ridge_lambda = 0.0;
};

/// One fitted conditional effect function f(t, x).
///
/// Coefficient layout of the second stage, with c = number of controls:
///  - linear_tsls: [1, x, controls, t]
///  - cond_linear: [phi(x), controls, t * phi(x)]
///  - sieve:       [phi(x), controls, b(t) (x) phi(x)]  (or b(t) alone when
///                 the basis does not interact)
class FittedEstimator {
 public:
  struct Parts {
    EstimatorSpec spec;
    std::vector<int> instruments;
    std::vector<int> controls;
    VectorXd control_means;
    Index covariates = 0;
    Index instrument_count = 0;
    CovariateBasis covariate_basis;
    UnivariateBasis treatment_basis;
    VectorXd instrument_center;
    VectorXd instrument_scale;
    MatrixXd first_stage;
    VectorXd second_stage;
    FitDiagnostics diagnostics;
  };

  explicit FittedEstimator(Parts parts);

  const EstimatorSpec& spec() const { return p_.spec; }
  EstimatorKind kind() const { return p_.spec.kind; }
  /// Instrument this estimator was fitted with (the first, for joint fits).
  int instrument() const { return p_.instruments.front(); }
  const std::vector<int>& instruments() const { return p_.instruments; }
  const std::vector<int>& controls() const { return p_.controls; }
  const VectorXd& control_means() const { return p_.control_means; }
  Index covariates() const { return p_.covariates; }
  Index instrument_count() const { return p_.instrument_count; }
  const CovariateBasis& covariate_basis() const { return p_.covariate_basis; }
  const UnivariateBasis& treatment_basis() const { return p_.treatment_basis; }
  const VectorXd& instrument_center() const { return p_.instrument_center; }
  const VectorXd& instrument_scale() const { return p_.instrument_scale; }
  const MatrixXd& first_stage() const { return p_.first_stage; }
  const VectorXd& second_stage() const { return p_.second_stage; }
  const FitDiagnostics& diagnostics() const { return p_.diagnostics; }

  double predict(const TestPoint& point) const;
  double predict(double t, const Eigen::Ref<const VectorXd>& x) const;
  /// predict() at each treatment value with the covariates and instruments
  /// of `row` held fixed.
  VectorXd predict_many(const VectorXd& treatments, const TestPoint& row) const;

  /// cond_linear: h and g blocks, so f = phi' h + controls' c + t phi' g.
  VectorXd intercept_coefficients() const;
  VectorXd slope_coefficients() const;

 private:
  double control_term(const TestPoint& point) const;

  Parts p_;
};

/// Fit on instrument columns `instruments` jointly, conditioning linearly on
/// instrument columns `controls` in both stages.
FittedEstimator fit_estimator(const Dataset& data, const std::vector<int>& instruments,
                              const std::vector<int>& controls, const EstimatorSpec& spec);

FittedEstimator fit_linear_tsls(const Dataset& data, int instrument,
                                const EstimatorSpec& spec = {EstimatorKind::linear_tsls});
FittedEstimator fit_cond_linear(const Dataset& data, int instrument,
                                const EstimatorSpec& spec);
FittedEstimator fit_sieve(const Dataset& data, int instrument, const EstimatorSpec& spec);

struct EnsembleFitConfig {
  EstimatorSpec spec;
  /// Instrument columns to fit, in order; empty means all.
  std::vector<int> instruments;
  Conditioning conditioning = Conditioning::independent;
  bool skip_failed = false;
};

struct FitFailure {
  int instrument = 0;
  std::string message;
};

struct EnsembleFit {
  std::vector<FittedEstimator> estimators;
  std::vector<FitFailure> failures;
};

/// One estimator per selected instrument. Fails fast on the first error
/// unless `skip_failed` is set, in which case failures are recorded.
EnsembleFit fit_ensemble(const Dataset& data, const EnsembleFitConfig& config);

}  // namespace modeiv
