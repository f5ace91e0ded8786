#include "modeiv/simulators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "modeiv/error.hpp"
#include "modeiv/random.hpp"

namespace modeiv {

double psi(double t) {
  const double d = t - 5.0;
  return 2.0 * (d * d * d * d / 600.0 + std::exp(-4.0 * d * d) + t / 10.0 - 2.0);
}

namespace {

constexpr int kCustomerTypes = 7;
constexpr Index kDemandCovariates = 1 + kCustomerTypes;

void check_valid_set(const std::vector<int>& valid, int k) {
  if (valid.empty()) throw ConfigError("at least one instrument must be valid");
  std::set<int> seen;
  for (int v : valid) {
    if (v < 0 || v >= k) {
      throw ConfigError("valid index " + std::to_string(v + 1) + " outside 1.." + std::to_string(k));
    }
    if (!seen.insert(v).second) throw ConfigError("valid index " + std::to_string(v + 1) + " repeated");
  }
}

double customer_type(const Eigen::Ref<const VectorXd>& x) {
  double s = 0.0;
  for (int i = 0; i < kCustomerTypes; ++i) s += (i + 1) * x(1 + i);
  return s;
}

}  // namespace

std::vector<int> valid_after_invalid(int k, int n_invalid) {
  if (n_invalid < 0 || n_invalid >= k) {
    throw ConfigError("invalid-instrument count " + std::to_string(n_invalid) +
                      " must lie in [0, " + std::to_string(k - 1) + "]");
  }
  std::vector<int> out;
  for (int j = n_invalid; j < k; ++j) out.push_back(j);
  return out;
}

std::vector<int> DemandConfig::valid_indices() const {
  if (!valid.empty()) {
    std::vector<int> out = valid;
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<int> out(static_cast<std::size_t>(k));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

void DemandConfig::validate() const {
  if (n < 1) throw ConfigError("n must be at least 1");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(p_std > 0.0) || !(y_std > 0.0)) throw ConfigError("standardization scales must be positive");
  check_valid_set(valid_indices(), k);
}

std::vector<int> MRConfig::valid_indices() const { return valid_after_invalid(K, K - n_valid); }

void MRConfig::validate() const {
  if (n < 1) throw ConfigError("n must be at least 1");
  if (K < 1) throw ConfigError("K must be at least 1");
  if (n_valid < 1 || n_valid > K) {
    throw ConfigError("n_valid = " + std::to_string(n_valid) + " must lie in [1, K = " +
                      std::to_string(K) + "]");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(u_variance > 0.0)) throw ConfigError("u_variance must be positive");
  if (pilot_size < 2) throw ConfigError("pilot_size must be at least 2");
}

double round_to_tenth(double v) {
  // Scale with a small guard so decimal ties such as 0.25 round away from zero
  // despite binary representation error.
  const double scaled = v * 10.0;
  const double r = std::round(scaled);
  if (std::abs(std::abs(scaled - std::trunc(scaled)) - 0.5) < 1e-9) {
    return (scaled >= 0.0 ? std::ceil(scaled) : std::floor(scaled)) / 10.0;
  }
  return r / 10.0;
}

double beta_of_x(const Eigen::Ref<const VectorXd>& x, const VectorXd& gamma_xt) {
  if (x.size() != gamma_xt.size()) {
    throw DimensionError("beta(x) expects " + std::to_string(gamma_xt.size()) +
                         " covariates, got " + std::to_string(x.size()));
  }
  return round_to_tenth(x.dot(gamma_xt));
}

double beta_of_x(const Eigen::Ref<const VectorXd>& x, const MRConfig& config) {
  return beta_of_x(x, draw_mr_parameters(config).gamma_xt);
}

TruthOracle::TruthOracle(DemandParameters params, std::vector<int> valid)
    : kind_(DgpKind::demand), demand_(std::move(params)), valid_(std::move(valid)) {}

TruthOracle::TruthOracle(MRParameters params, std::vector<int> valid)
    : kind_(DgpKind::mr), mr_(std::move(params)), valid_(std::move(valid)) {}

Index TruthOracle::instrument_count() const {
  return kind_ == DgpKind::demand ? demand_.beta_zp.size() : mr_.p.size();
}

Index TruthOracle::covariate_count() const {
  return kind_ == DgpKind::demand ? kDemandCovariates : mr_.gamma_xt.size();
}

double TruthOracle::structural(double treatment, const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != covariate_count()) {
    throw DimensionError("truth expects " + std::to_string(covariate_count()) +
                         " covariates, got " + std::to_string(x.size()));
  }
  if (kind_ == DgpKind::demand) {
    const auto& d = demand_;
    const double price = treatment * d.p_std + d.p_mu;
    const double sp = customer_type(x) * psi(x(0));
    const double raw = 100.0 + 10.0 * sp + (sp - 2.0) * price;
    return (raw - d.y_mu) / d.y_std;
  }
  const double direct = mr_.delta.dot(2.0 * mr_.p);
  return beta_of_x(x, mr_.gamma_xt) * treatment + direct;
}

double TruthOracle::response(double treatment, const Eigen::Ref<const VectorXd>& x,
                             const Eigen::Ref<const VectorXd>& z) const {
  if (z.size() != instrument_count()) {
    throw DimensionError("truth expects " + std::to_string(instrument_count()) +
                         " instruments, got " + std::to_string(z.size()));
  }
  if (x.size() != covariate_count()) {
    throw DimensionError("truth expects " + std::to_string(covariate_count()) +
                         " covariates, got " + std::to_string(x.size()));
  }
  if (kind_ == DgpKind::demand) {
    const auto& d = demand_;
    const double price = treatment * d.p_std + d.p_mu;
    const double sp = customer_type(x) * psi(x(0));
    const double raw =
        100.0 + 10.0 * sp + (sp - 2.0) * price + d.gamma * 60.0 * std::sin(z.dot(d.beta_zy));
    return (raw - d.y_mu) / d.y_std;
  }
  return beta_of_x(x, mr_.gamma_xt) * treatment + mr_.delta.dot(z);
}

double TruthOracle::slope(const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != covariate_count()) {
    throw DimensionError("truth expects " + std::to_string(covariate_count()) +
                         " covariates, got " + std::to_string(x.size()));
  }
  if (kind_ == DgpKind::demand) {
    const double sp = customer_type(x) * psi(x(0));
    return (sp - 2.0) * demand_.p_std / demand_.y_std;
  }
  return beta_of_x(x, mr_.gamma_xt);
}

DemandParameters draw_demand_parameters(const DemandConfig& config) {
  config.validate();
  DemandParameters p;
  p.beta_zp.resize(config.k);
  p.beta_zy.resize(config.k);
  Rng zp(config.param_seed, "demand/beta_zp");
  Rng zy(config.param_seed, "demand/beta_zy");
  for (int j = 0; j < config.k; ++j) {
    p.beta_zp(j) = zp.uniform(0.5, 1.5);
    p.beta_zy(j) = zy.uniform(0.5, 1.5);
  }
  for (int v : config.valid_indices()) p.beta_zy(v) = 0.0;
  p.gamma = config.gamma;
  p.p_std = config.p_std;
  p.p_mu = config.p_mu;
  p.y_std = config.y_std;
  p.y_mu = config.y_mu;
  return p;
}

std::pair<Dataset, TruthOracle> generate_demand(const DemandConfig& config) {
  DemandParameters params = draw_demand_parameters(config);
  TruthOracle truth(params, config.valid_indices());
  const Index n = config.n;
  const int k = config.k;

  Rng rz(config.noise_seed, "demand/z");
  Rng rnu(config.noise_seed, "demand/nu");
  Rng rt(config.noise_seed, "demand/t");
  Rng rtype(config.noise_seed, "demand/type");
  Rng re(config.noise_seed, "demand/e");

  MatrixXd z(n, k);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) z(i, j) = rz.normal();
  }
  VectorXd y(n), p(n);
  MatrixXd x = MatrixXd::Zero(n, kDemandCovariates);
  const double e_sd = std::sqrt(1.0 - config.rho * config.rho);
  for (Index i = 0; i < n; ++i) {
    const double time = rt.uniform(0.0, 10.0);
    const auto type = static_cast<Index>(rtype.index(kCustomerTypes));
    double nu = rnu.normal();
    double e = config.rho * nu + e_sd * re.normal();
    if (config.zero_noise) nu = e = 0.0;
    x(i, 0) = time;
    x(i, 1 + type) = 1.0;
    const double raw_price = 25.0 + (z.row(i).dot(params.beta_zp) + 3.0) * psi(time) + nu;
    p(i) = (raw_price - config.p_mu) / config.p_std;
    y(i) = truth.response(p(i), x.row(i).transpose(), z.row(i).transpose()) + e / config.y_std;
  }
  std::vector<std::string> x_names{"time"};
  for (int c = 1; c <= kCustomerTypes; ++c) x_names.push_back("type_" + std::to_string(c));
  return {Dataset(std::move(y), std::move(p), std::move(x), std::move(z), std::move(x_names)),
          std::move(truth)};
}

namespace {

double binomial2(Rng& rng, double p) {
  return (rng.bernoulli(p) ? 1.0 : 0.0) + (rng.bernoulli(p) ? 1.0 : 0.0);
}

double sample_sd(const VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

MRParameters draw_mr_parameters(const MRConfig& config) {
  config.validate();
  const int K = config.K;
  MRParameters out;
  out.p.resize(K);
  out.nu_x.resize(K);
  out.nu_y.resize(K);
  Rng rp(config.param_seed, "mr/p");
  Rng rnx(config.param_seed, "mr/nu_x");
  Rng rny(config.param_seed, "mr/nu_y");
  for (int j = 0; j < K; ++j) {
    out.p(j) = rp.uniform(0.1, 0.9);
    out.nu_x(j) = rnx.uniform(0.01, 0.2);
    out.nu_y(j) = rny.uniform(0.01, 0.2);
  }

  Rng rg(config.param_seed, "mr/gamma_xt");
  std::array<int, kMRCovariates> order{};
  std::iota(order.begin(), order.end(), 0);
  rg.shuffle(std::span<int>(order));
  out.gamma_xt = VectorXd::Zero(kMRCovariates);
  for (int i = 0; i < 3; ++i) out.gamma_xt(order[static_cast<std::size_t>(i)]) = rg.uniform(0.2, 0.5);

  // Pilot draw on the parameter stream for the instrument scale factors.
  const Index m = config.pilot_size;
  Rng rz(config.param_seed, "mr/pilot_z");
  VectorXd sx(m), sy(m);
  for (Index i = 0; i < m; ++i) {
    double ax = 0.0, ay = 0.0;
    for (int j = 0; j < K; ++j) {
      const double zij = binomial2(rz, out.p(j));
      ax += out.nu_x(j) * zij;
      ay += out.nu_y(j) * zij;
    }
    sx(i) = ax;
    sy(i) = ay;
  }
  out.sigma_zx = sample_sd(sx);
  out.sigma_zy = sample_sd(sy);
  if (!(out.sigma_zx > 0.0) || !(out.sigma_zy > 0.0)) {
    throw ConfigError("degenerate instrument pilot; increase pilot_size");
  }

  const double root_tenth = std::sqrt(0.1);
  out.alpha = root_tenth / out.sigma_zx * out.nu_x;
  out.delta = VectorXd::Zero(K);
  const int n_invalid = K - config.n_valid;
  for (int j = 0; j < n_invalid; ++j) {
    out.delta(j) = n_invalid * root_tenth / (K * out.sigma_zy) * out.nu_y(j);
  }

  out.rho = config.rho;
  out.sigma_u = std::sqrt(config.u_variance);

  // Noise scales from population moments so that Var(t) = Var(y) = 1.
  const VectorXd zvar = 2.0 * out.p.array() * (1.0 - out.p.array());
  const VectorXd zmean = 2.0 * out.p;
  const double su2 = config.u_variance;
  const double var_az = (out.alpha.array().square() * zvar.array()).sum();
  const double sx2 = 1.0 - var_az - config.rho * config.rho * su2;
  if (!(sx2 > 0.0)) throw ConfigError("treatment noise variance would be non-positive; lower rho or u_variance");
  out.sigma_x = std::sqrt(sx2);

  Rng rx(config.param_seed, "mr/pilot_x");
  double eb = 0.0, eb2 = 0.0;
  VectorXd xrow(kMRCovariates);
  for (Index i = 0; i < m; ++i) {
    for (int c = 0; c < kMRCovariates; ++c) xrow(c) = rx.uniform(-0.5, 0.5);
    const double b = beta_of_x(xrow, out.gamma_xt);
    eb += b;
    eb2 += b * b;
  }
  eb /= static_cast<double>(m);
  eb2 /= static_cast<double>(m);

  const double et = out.alpha.dot(zmean);
  const double et2 = 1.0 + et * et;
  const double var_bt = eb2 * et2 - eb * eb * et * et;
  const double var_dz = (out.delta.array().square() * zvar.array()).sum();
  const double cov_bt_dz = eb * (out.alpha.array() * out.delta.array() * zvar.array()).sum();
  const double cov_bt_u = eb * config.rho * su2;
  const double sy2 = 1.0 - (var_bt + var_dz + su2 + 2.0 * cov_bt_dz + 2.0 * cov_bt_u);
  if (!(sy2 > 0.0)) throw ConfigError("outcome noise variance would be non-positive; lower u_variance");
  out.sigma_y = std::sqrt(sy2);
  return out;
}

std::pair<Dataset, TruthOracle> generate_mr(const MRConfig& config) {
  MRParameters params = draw_mr_parameters(config);
  TruthOracle truth(params, config.valid_indices());
  const Index n = config.n;
  const int K = config.K;

  Rng rz(config.noise_seed, "mr/z");
  Rng ru(config.noise_seed, "mr/u");
  Rng rx(config.noise_seed, "mr/x");
  Rng rex(config.noise_seed, "mr/eps_x");
  Rng rey(config.noise_seed, "mr/eps_y");

  MatrixXd z(n, K);
  MatrixXd x(n, kMRCovariates);
  VectorXd t(n), y(n);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < K; ++j) z(i, j) = binomial2(rz, params.p(j));
    for (int c = 0; c < kMRCovariates; ++c) x(i, c) = rx.uniform(-0.5, 0.5);
    double u = params.sigma_u * ru.normal();
    double ex = params.sigma_x * rex.normal();
    double ey = params.sigma_y * rey.normal();
    if (config.zero_noise) u = ex = ey = 0.0;
    t(i) = z.row(i).dot(params.alpha) + params.rho * u + ex;
    y(i) = truth.response(t(i), x.row(i).transpose(), z.row(i).transpose()) + u + ey;
  }
  return {Dataset(std::move(y), std::move(t), std::move(x), std::move(z)), std::move(truth)};
}

}  // namespace modeiv
