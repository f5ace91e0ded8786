#pragma once

#include <optional>

#include <Eigen/Dense>

namespace modeiv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Shape of a univariate expansion and how it enters the covariate map.
struct BasisSpec {
  /// Polynomial degree q (powers 1..q of the range-scaled variable).
  int degree = 1;
  /// Gaussian radial bumps with evenly spaced centres over the fitted range.
  int bumps = 0;
  /// Bump standard deviation as a fraction of the centre spacing.
  double bump_width = 0.5;
  /// Covariate column expanded by the univariate basis (cond_linear only).
  std::optional<int> expand_column;
  /// Cross the expansion with the remaining covariates (cond_linear) or the
  /// treatment basis with the covariate map (sieve).
  bool interact = true;
};

/// Powers and radial bumps of one variable, scaled by a fitted range.
class UnivariateBasis {
 public:
  UnivariateBasis() = default;
  UnivariateBasis(double lo, double hi, int degree, int bumps, double bump_width);

  /// Range taken from the data; degenerate ranges are widened to unit width.
  static UnivariateBasis fit(const Eigen::Ref<const VectorXd>& values, int degree,
                             int bumps, double bump_width);

  Index size() const { return degree_ + bumps_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int degree() const { return degree_; }
  int bumps() const { return bumps_; }
  double bump_width() const { return bump_width_; }

  void evaluate(double v, Eigen::Ref<VectorXd> out) const;
  MatrixXd evaluate(const Eigen::Ref<const VectorXd>& values) const;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  int degree_ = 1;
  int bumps_ = 0;
  double bump_width_ = 0.5;
};

/// Covariate feature map phi(x).
///
/// Without an expanded column: phi(x) = [1, x]. With expanded column e and
/// univariate basis B: phi(x) = [1, x_{-e}, B(x_e), x_{-e} (x) B(x_e)], the
/// last block present only when `interact` is set.
class CovariateBasis {
 public:
  CovariateBasis() = default;
  CovariateBasis(Index covariates, std::optional<int> expand_column,
                 UnivariateBasis expansion, bool interact);

  static CovariateBasis fit(const MatrixXd& x, const BasisSpec& spec);

  Index covariates() const { return covariates_; }
  std::optional<int> expand_column() const { return expand_column_; }
  const UnivariateBasis& expansion() const { return expansion_; }
  bool interact() const { return interact_; }

  Index size() const;
  /// Size of the instrument modifier vector [1, B(x_e)] (1 without expansion).
  Index modifier_size() const;

  void features(const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out) const;
  MatrixXd features(const MatrixXd& x) const;
  void modifiers(const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out) const;
  MatrixXd modifiers(const MatrixXd& x) const;

 private:
  Index covariates_ = 0;
  std::optional<int> expand_column_;
  UnivariateBasis expansion_;
  bool interact_ = true;
};

}  // namespace modeiv
