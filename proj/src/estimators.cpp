#include "modeiv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "modeiv/error.hpp"
#include "modeiv/linalg.hpp"

namespace modeiv {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::linear_tsls: return "linear_tsls";
    case EstimatorKind::cond_linear: return "cond_linear";
    case EstimatorKind::sieve: return "sieve";
  }
  return "unknown";
}

std::string to_string(Conditioning conditioning) {
  return conditioning == Conditioning::independent ? "independent" : "leave_one_out";
}

std::string to_string(SecondStage second_stage) {
  switch (second_stage) {
    case SecondStage::plug_in: return "plug_in";
    case SecondStage::projected: return "projected";
    case SecondStage::instrumented: return "instrumented";
  }
  return "unknown";
}

SecondStage parse_second_stage(std::string_view text) {
  if (text == "plug_in") return SecondStage::plug_in;
  if (text == "projected") return SecondStage::projected;
  if (text == "instrumented") return SecondStage::instrumented;
  throw ConfigError("unknown second stage '" + std::string(text) +
                    "' (expected plug_in, projected or instrumented)");
}

EstimatorKind parse_estimator_kind(std::string_view text) {
  if (text == "linear_tsls" || text == "linear") return EstimatorKind::linear_tsls;
  if (text == "cond_linear") return EstimatorKind::cond_linear;
  if (text == "sieve") return EstimatorKind::sieve;
  throw ConfigError("unknown estimator kind '" + std::string(text) +
                    "' (expected linear_tsls, cond_linear or sieve)");
}

Conditioning parse_conditioning(std::string_view text) {
  if (text == "independent") return Conditioning::independent;
  if (text == "leave_one_out") return Conditioning::leave_one_out;
  throw ConfigError("unknown conditioning '" + std::string(text) +
                    "' (expected independent or leave_one_out)");
}

double EstimatorSpec::resolved_ridge(Index n_train) const {
  if (ridge_lambda) return *ridge_lambda;
  if (kind == EstimatorKind::linear_tsls) return 0.0;
  return ridge_per_row * static_cast<double>(n_train);
}

FittedEstimator::FittedEstimator(Parts parts) : p_(std::move(parts)) {
  if (p_.instruments.empty()) throw ConfigError("estimator needs at least one instrument");
  if (!p_.second_stage.allFinite() || !p_.first_stage.allFinite()) {
    throw SingularDesignError("fitted coefficients are not finite");
  }
}

double FittedEstimator::control_term(const TestPoint& point) const {
  const Index c = static_cast<Index>(p_.controls.size());
  if (c == 0) return 0.0;
  const Index offset = p_.covariate_basis.size();
  double sum = 0.0;
  for (Index i = 0; i < c; ++i) {
    double value = p_.control_means(i);
    if (point.z) {
      if (point.z->size() != p_.instrument_count) {
        throw DimensionError("test point has " + std::to_string(point.z->size()) +
                             " instruments, estimator expects " +
                             std::to_string(p_.instrument_count));
      }
      value = (*point.z)(p_.controls[static_cast<std::size_t>(i)]);
    }
    sum += value * p_.second_stage(offset + i);
  }
  return sum;
}

double FittedEstimator::predict(const TestPoint& point) const {
  if (point.x.size() != p_.covariates) {
    throw DimensionError("test point has " + std::to_string(point.x.size()) +
                         " covariates, estimator expects " + std::to_string(p_.covariates));
  }
  const Index m = p_.covariate_basis.size();
  const Index c = static_cast<Index>(p_.controls.size());
  VectorXd phi(m);
  p_.covariate_basis.features(point.x, phi);
  const double base = phi.dot(p_.second_stage.head(m)) + control_term(point);
  const auto tail = p_.second_stage.tail(p_.second_stage.size() - m - c);
  switch (p_.spec.kind) {
    case EstimatorKind::linear_tsls:
      return base + point.t * tail(0);
    case EstimatorKind::cond_linear:
      return base + point.t * phi.dot(tail);
    case EstimatorKind::sieve: {
      VectorXd b(p_.treatment_basis.size());
      p_.treatment_basis.evaluate(point.t, b);
      if (!p_.spec.basis.interact) return base + b.dot(tail);
      double sum = 0.0;
      for (Index r = 0; r < b.size(); ++r) sum += b(r) * phi.dot(tail.segment(r * m, m));
      return base + sum;
    }
  }
  return base;
}

double FittedEstimator::predict(double t, const Eigen::Ref<const VectorXd>& x) const {
  return predict(TestPoint{t, x, std::nullopt});
}

VectorXd FittedEstimator::predict_many(const VectorXd& treatments, const TestPoint& row) const {
  if (row.x.size() != p_.covariates) {
    throw DimensionError("test point has " + std::to_string(row.x.size()) +
                         " covariates, estimator expects " + std::to_string(p_.covariates));
  }
  VectorXd out(treatments.size());
  if (p_.spec.kind == EstimatorKind::sieve) {
    for (Index i = 0; i < treatments.size(); ++i) {
      out(i) = predict(TestPoint{treatments(i), row.x, row.z});
    }
    return out;
  }
  const Index m = p_.covariate_basis.size();
  const Index c = static_cast<Index>(p_.controls.size());
  VectorXd phi(m);
  p_.covariate_basis.features(row.x, phi);
  const double base = phi.dot(p_.second_stage.head(m)) + control_term(row);
  const auto tail = p_.second_stage.tail(p_.second_stage.size() - m - c);
  const double slope = p_.spec.kind == EstimatorKind::linear_tsls ? tail(0) : phi.dot(tail);
  out = (base + slope * treatments.array()).matrix();
  return out;
}

VectorXd FittedEstimator::intercept_coefficients() const {
  return p_.second_stage.head(p_.covariate_basis.size());
}

VectorXd FittedEstimator::slope_coefficients() const {
  const Index m = p_.covariate_basis.size();
  const Index c = static_cast<Index>(p_.controls.size());
  return p_.second_stage.tail(p_.second_stage.size() - m - c);
}

namespace {

double variance(const Eigen::Ref<const VectorXd>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

MatrixXd hcat(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

/// Row-wise Kronecker product: out.row(i) = a.row(i) (x) b.row(i).
MatrixXd row_kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() * b.cols());
  for (Index r = 0; r < a.cols(); ++r) {
    out.middleCols(r * b.cols(), b.cols()) = b.array().colwise() * a.col(r).array();
  }
  return out;
}

MatrixXd select_columns(const MatrixXd& z, const std::vector<int>& columns) {
  MatrixXd out(z.rows(), static_cast<Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) out.col(static_cast<Index>(i)) = z.col(columns[i]);
  return out;
}

struct FirstStage {
  MatrixXd coefficients;
  MatrixXd fitted;
  double f_min = 0.0;
  double partial_r2 = 0.0;
  double residual_variance = 0.0;
  double strength = 0.0;
};

FirstStage run_first_stage(const MatrixXd& exog, const MatrixXd& instr, const MatrixXd& endog,
                           double ridge, double threshold, int instrument) {
  const Index n = exog.rows();
  const MatrixXd w = hcat(exog, instr);

  // Strength is assessed without penalty and rank-tolerantly, so that a
  // useless instrument reports as weak rather than as a singular design.
  const LeastSquaresFit restricted =
      solve_least_squares(exog, endog, 0.0, 0, RankPolicy::tolerant);
  const LeastSquaresFit unrestricted =
      solve_least_squares(w, endog, 0.0, 0, RankPolicy::tolerant);
  const Index df1 = unrestricted.rank - restricted.rank;
  const Index df2 = n - unrestricted.rank;

  FirstStage out;
  out.f_min = std::numeric_limits<double>::infinity();
  double r2_min = 1.0;
  for (Index c = 0; c < endog.cols(); ++c) {
    const double rss_r = restricted.residuals.col(c).squaredNorm();
    const double rss_u = unrestricted.residuals.col(c).squaredNorm();
    double f = 0.0;
    if (df1 > 0 && df2 > 0) {
      const double gain = std::max(rss_r - rss_u, 0.0);
      f = rss_u > 0.0 ? (gain / static_cast<double>(df1)) / (rss_u / static_cast<double>(df2))
                      : (gain > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    }
    out.f_min = std::min(out.f_min, f);
    r2_min = std::min(r2_min, rss_r > 0.0 ? std::max(rss_r - rss_u, 0.0) / rss_r : 0.0);
  }
  out.partial_r2 = r2_min;
  if (!(out.f_min >= threshold)) throw WeakInstrumentError(instrument, out.f_min, threshold);

  const VectorXd driven = (w * unrestricted.coefficients.col(0)) - (exog * restricted.coefficients.col(0));
  out.strength = variance(driven);

  if (ridge == 0.0 && unrestricted.rank == w.cols()) {
    out.coefficients = unrestricted.coefficients;
  } else {
    out.coefficients = solve_least_squares(w, endog, ridge, 1, RankPolicy::strict).coefficients;
  }
  out.fitted = w * out.coefficients;
  out.residual_variance = variance(endog.col(0) - out.fitted.col(0));
  return out;
}

void check_columns(const Dataset& data, const std::vector<int>& instruments,
                   const std::vector<int>& controls) {
  if (instruments.empty()) throw ConfigError("at least one instrument is required");
  std::set<int> seen;
  for (const auto* list : {&instruments, &controls}) {
    for (int j : *list) {
      if (j < 0 || j >= data.k()) {
        throw ConfigError("instrument index " + std::to_string(j + 1) + " out of range 1.." +
                          std::to_string(data.k()));
      }
      if (!seen.insert(j).second) {
        throw ConfigError("instrument index " + std::to_string(j + 1) + " used twice");
      }
    }
  }
}

void check_rows(Index n, Index columns, const char* stage) {
  if (columns >= n) {
    throw PreconditionError(std::string(stage) + " design has " + std::to_string(columns) +
                            " columns for " + std::to_string(n) +
                            " rows; reduce the basis size or add data");
  }
}

}  // namespace

FittedEstimator fit_estimator(const Dataset& data, const std::vector<int>& instruments,
                              const std::vector<int>& controls, const EstimatorSpec& spec) {
  check_columns(data, instruments, controls);
  if ((spec.ridge_lambda && !(*spec.ridge_lambda >= 0.0)) || !(spec.ridge_per_row >= 0.0)) {
    throw ConfigError("ridge penalties must be non-negative");
  }
  if (spec.kind != EstimatorKind::linear_tsls && spec.basis.degree < 1) {
    throw ConfigError("basis degree must be at least 1");
  }
  const Index n = data.n();
  const double ridge = spec.resolved_ridge(n);

  FittedEstimator::Parts parts;
  parts.spec = spec;
  parts.instruments = instruments;
  parts.controls = controls;
  parts.covariates = data.d();
  parts.instrument_count = data.k();

  const MatrixXd ctrl = select_columns(data.z(), controls);
  parts.control_means = ctrl.colwise().mean().transpose();
  if (controls.empty()) parts.control_means.resize(0);
  const MatrixXd zj = select_columns(data.z(), instruments);

  MatrixXd phi;
  MatrixXd instr;
  MatrixXd endog;
  switch (spec.kind) {
    case EstimatorKind::linear_tsls: {
      if (n <= data.d() + 2) {
        throw PreconditionError("linear 2SLS needs n > d + 2 (n = " + std::to_string(n) +
                                ", d = " + std::to_string(data.d()) + ")");
      }
      parts.covariate_basis = CovariateBasis(data.d(), std::nullopt, UnivariateBasis(), false);
      phi = parts.covariate_basis.features(data.x());
      instr = zj;
      endog = data.t();
      break;
    }
    case EstimatorKind::cond_linear: {
      parts.covariate_basis = CovariateBasis::fit(data.x(), spec.basis);
      phi = parts.covariate_basis.features(data.x());
      instr = row_kron(zj, parts.covariate_basis.modifiers(data.x()));
      endog = data.t();
      break;
    }
    case EstimatorKind::sieve: {
      parts.covariate_basis = CovariateBasis(data.d(), std::nullopt, UnivariateBasis(), false);
      phi = parts.covariate_basis.features(data.x());
      parts.treatment_basis =
          UnivariateBasis::fit(data.t(), spec.basis.degree, spec.basis.bumps, spec.basis.bump_width);
      const MatrixXd b = parts.treatment_basis.evaluate(data.t());
      const Index nb = b.cols();
      parts.instrument_center = zj.colwise().mean().transpose();
      parts.instrument_scale.resize(zj.cols());
      MatrixXd powers(n, zj.cols() * nb);
      for (Index j = 0; j < zj.cols(); ++j) {
        const double sd = std::sqrt(variance(zj.col(j)));
        parts.instrument_scale(j) = sd > 0.0 ? sd : 1.0;
        const VectorXd u = (zj.col(j).array() - parts.instrument_center(j)) / parts.instrument_scale(j);
        VectorXd p = VectorXd::Ones(n);
        for (Index a = 0; a < nb; ++a) {
          p = p.cwiseProduct(u);
          powers.col(j * nb + a) = p;
        }
      }
      if (spec.basis.interact) {
        endog = row_kron(b, phi);
        instr = row_kron(powers, phi);
      } else {
        endog = b;
        instr = powers;
      }
      break;
    }
  }

  const MatrixXd exog = hcat(phi, ctrl);
  check_rows(n, exog.cols() + instr.cols(), "first-stage");
  const FirstStage first = run_first_stage(exog, instr, endog, ridge,
                                           spec.weak_instrument_threshold, instruments.front());

  MatrixXd second_endog;
  MatrixXd actual_endog;
  bool instrumented = false;
  if (spec.kind == EstimatorKind::cond_linear) {
    actual_endog = phi.array().colwise() * data.t().array();
    second_endog = phi.array().colwise() * first.fitted.col(0).array();
    if (spec.second_stage == SecondStage::projected) {
      const MatrixXd w2 = hcat(exog, row_kron(zj, phi));
      check_rows(n, w2.cols(), "projection");
      second_endog = w2 * solve_least_squares(w2, actual_endog, ridge, 1, RankPolicy::strict).coefficients;
    }
    instrumented = spec.second_stage == SecondStage::instrumented;
  } else {
    second_endog = first.fitted;
    actual_endog = endog;
  }
  const MatrixXd x2 = hcat(exog, second_endog);
  check_rows(n, x2.cols(), "second-stage");
  LeastSquaresFit second;
  try {
    if (instrumented) {
      // Just-identified IV: x2 instruments the actual regressors, with the
      // same ridge on the non-intercept coefficients.
      MatrixXd lhs = x2.transpose() * hcat(exog, actual_endog);
      for (Index j = 1; j < lhs.cols(); ++j) lhs(j, j) += ridge;
      const MatrixXd rhs = x2.transpose() * data.y();
      second = solve_least_squares(lhs, rhs, 0.0, 0, RankPolicy::strict);
    } else {
      second = solve_least_squares(x2, data.y(), ridge, 1, RankPolicy::strict);
    }
  } catch (const SingularDesignError& e) {
    throw SingularDesignError(std::string(e.what()) + " (instrument z_" +
                              std::to_string(instruments.front() + 1) +
                              "; increase ridge_lambda or use a smaller basis)");
  }
  parts.first_stage = first.coefficients;
  parts.second_stage = second.coefficients.col(0);

  const VectorXd structural_residual = data.y() - hcat(exog, actual_endog) * parts.second_stage;
  parts.diagnostics.first_stage_f = first.f_min;
  parts.diagnostics.first_stage_partial_r2 = first.partial_r2;
  parts.diagnostics.first_stage_residual_variance = first.residual_variance;
  parts.diagnostics.second_stage_residual_variance = variance(structural_residual);
  parts.diagnostics.instrument_strength = first.strength;
  parts.diagnostics.n_train = n;
  parts.diagnostics.ridge_lambda = ridge;
  return FittedEstimator(std::move(parts));
}

FittedEstimator fit_linear_tsls(const Dataset& data, int instrument, const EstimatorSpec& spec) {
  EstimatorSpec s = spec;
  s.kind = EstimatorKind::linear_tsls;
  return fit_estimator(data, {instrument}, {}, s);
}

FittedEstimator fit_cond_linear(const Dataset& data, int instrument, const EstimatorSpec& spec) {
  EstimatorSpec s = spec;
  s.kind = EstimatorKind::cond_linear;
  return fit_estimator(data, {instrument}, {}, s);
}

FittedEstimator fit_sieve(const Dataset& data, int instrument, const EstimatorSpec& spec) {
  EstimatorSpec s = spec;
  s.kind = EstimatorKind::sieve;
  return fit_estimator(data, {instrument}, {}, s);
}

EnsembleFit fit_ensemble(const Dataset& data, const EnsembleFitConfig& config) {
  std::vector<int> selected = config.instruments;
  if (selected.empty()) {
    for (int j = 0; j < data.k(); ++j) selected.push_back(j);
  }
  check_columns(data, selected, {});

  EnsembleFit out;
  for (int j : selected) {
    std::vector<int> controls;
    if (config.conditioning == Conditioning::leave_one_out) {
      for (int i : selected) {
        if (i != j) controls.push_back(i);
      }
    }
    try {
      out.estimators.push_back(fit_estimator(data, {j}, controls, config.spec));
    } catch (const Error& e) {
      if (!config.skip_failed) throw;
      out.failures.push_back({j, e.what()});
    }
  }
  return out;
}

}  // namespace modeiv
