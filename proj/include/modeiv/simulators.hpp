#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "modeiv/dataset.hpp"

namespace modeiv {

/// psi(t) = 2((t - 5)^4 / 600 + exp(-4 (t - 5)^2) + t / 10 - 2).
double psi(double t);

enum class DgpKind { demand, mr };

/// Demand-with-exclusion-bias generator. Covariates are [time, 7 one-hot
/// customer types]; the treatment column is the standardized price.
struct DemandConfig {
  Index n = 10000;
  int k = 8;
  /// 0-based valid instrument indices; empty means all valid.
  std::vector<int> valid;
  double gamma = 1.0;
  double rho = 0.5;
  std::uint64_t param_seed = 0;
  std::uint64_t noise_seed = 1;
  double p_std = 3.7;
  double p_mu = 17.779;
  double y_std = 158.0;
  double y_mu = -292.1;
  /// Force the price and outcome noise (nu, e) to zero.
  bool zero_noise = false;

  std::vector<int> valid_indices() const;
  void validate() const;
};

/// Instruments 0..n_invalid-1 invalid, the rest valid.
std::vector<int> valid_after_invalid(int k, int n_invalid);

struct DemandParameters {
  VectorXd beta_zp;
  VectorXd beta_zy;
  double gamma = 0.0;
  double p_std = 3.7;
  double p_mu = 17.779;
  double y_std = 158.0;
  double y_mu = -292.1;
};

/// Mendelian-randomization generator with K binomial genotypes and a
/// 10-dimensional covariate driving the effect beta(x).
struct MRConfig {
  Index n = 50000;
  int K = 20;
  int n_valid = 10;
  double rho = 0.5;
  /// Variance of the shared confounder u.
  double u_variance = 0.5;
  std::uint64_t param_seed = 0;
  std::uint64_t noise_seed = 1;
  /// Sample size of the parameter-stream pilot used for sigma_zx, sigma_zy
  /// and the moments of beta(x).
  Index pilot_size = 100000;
  /// Force u, eps_x and eps_y to zero.
  bool zero_noise = false;

  std::vector<int> valid_indices() const;
  void validate() const;
};

struct MRParameters {
  VectorXd p;
  VectorXd nu_x;
  VectorXd nu_y;
  VectorXd alpha;
  VectorXd delta;
  VectorXd gamma_xt;
  double sigma_zx = 0.0;
  double sigma_zy = 0.0;
  double rho = 0.5;
  double sigma_u = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
};

inline constexpr int kMRCovariates = 10;

/// round(x' gamma, 0.1) with ties away from zero.
double round_to_tenth(double v);
double beta_of_x(const Eigen::Ref<const VectorXd>& x, const VectorXd& gamma_xt);
double beta_of_x(const Eigen::Ref<const VectorXd>& x, const MRConfig& config);

/// Noiseless ground truth for a generated dataset.
class TruthOracle {
 public:
  TruthOracle(DemandParameters params, std::vector<int> valid);
  TruthOracle(MRParameters params, std::vector<int> valid);

  DgpKind kind() const { return kind_; }
  Index instrument_count() const;
  Index covariate_count() const;
  const std::vector<int>& valid() const { return valid_; }
  const DemandParameters& demand() const { return demand_; }
  const MRParameters& mr() const { return mr_; }

  /// Structural effect averaged over the instruments' direct effects.
  double structural(double treatment, const Eigen::Ref<const VectorXd>& x) const;
  /// Noiseless outcome for one row, including direct instrument effects.
  double response(double treatment, const Eigen::Ref<const VectorXd>& x,
                  const Eigen::Ref<const VectorXd>& z) const;
  /// d structural / d treatment at x.
  double slope(const Eigen::Ref<const VectorXd>& x) const;

 private:
  DgpKind kind_;
  DemandParameters demand_;
  MRParameters mr_;
  std::vector<int> valid_;
};

DemandParameters draw_demand_parameters(const DemandConfig& config);
MRParameters draw_mr_parameters(const MRConfig& config);

std::pair<Dataset, TruthOracle> generate_demand(const DemandConfig& config);
std::pair<Dataset, TruthOracle> generate_mr(const MRConfig& config);

}  // namespace modeiv
