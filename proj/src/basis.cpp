#include "modeiv/basis.hpp"

#include <cmath>

#include "modeiv/error.hpp"

namespace modeiv {

UnivariateBasis::UnivariateBasis(double lo, double hi, int degree, int bumps,
                                 double bump_width)
    : lo_(lo), hi_(hi), degree_(degree), bumps_(bumps), bump_width_(bump_width) {
  if (degree < 0 || bumps < 0) throw ConfigError("basis sizes must be non-negative");
  if (!(hi > lo)) throw ConfigError("basis range must have hi > lo");
  if (bumps > 0 && !(bump_width > 0.0)) throw ConfigError("bump width must be positive");
}

UnivariateBasis UnivariateBasis::fit(const Eigen::Ref<const VectorXd>& values,
                                     int degree, int bumps, double bump_width) {
  double lo = values.minCoeff();
  double hi = values.maxCoeff();
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return UnivariateBasis(lo, hi, degree, bumps, bump_width);
}

void UnivariateBasis::evaluate(double v, Eigen::Ref<VectorXd> out) const {
  const double u = 2.0 * (v - lo_) / (hi_ - lo_) - 1.0;
  double power = 1.0;
  for (int p = 0; p < degree_; ++p) {
    power *= u;
    out(p) = power;
  }
  if (bumps_ == 0) return;
  const double spacing = bumps_ > 1 ? (hi_ - lo_) / (bumps_ - 1) : (hi_ - lo_);
  const double width = bump_width_ * spacing;
  for (int b = 0; b < bumps_; ++b) {
    const double centre = bumps_ > 1 ? lo_ + b * spacing : 0.5 * (lo_ + hi_);
    const double r = (v - centre) / width;
    out(degree_ + b) = std::exp(-0.5 * r * r);
  }
}

MatrixXd UnivariateBasis::evaluate(const Eigen::Ref<const VectorXd>& values) const {
  MatrixXd out(values.size(), size());
  VectorXd row(size());
  for (Index i = 0; i < values.size(); ++i) {
    evaluate(values(i), row);
    out.row(i) = row.transpose();
  }
  return out;
}

CovariateBasis::CovariateBasis(Index covariates, std::optional<int> expand_column,
                               UnivariateBasis expansion, bool interact)
    : covariates_(covariates),
      expand_column_(expand_column),
      expansion_(std::move(expansion)),
      interact_(interact) {
  if (expand_column_ && (*expand_column_ < 0 || *expand_column_ >= covariates_)) {
    throw ConfigError("expand column " + std::to_string(*expand_column_) +
                      " out of range for " + std::to_string(covariates_) + " covariates");
  }
}

CovariateBasis CovariateBasis::fit(const MatrixXd& x, const BasisSpec& spec) {
  if (!spec.expand_column) {
    return CovariateBasis(x.cols(), std::nullopt, UnivariateBasis(), spec.interact);
  }
  const int e = *spec.expand_column;
  if (e < 0 || e >= x.cols()) {
    throw ConfigError("expand column " + std::to_string(e) + " out of range");
  }
  return CovariateBasis(
      x.cols(), e,
      UnivariateBasis::fit(x.col(e), spec.degree, spec.bumps, spec.bump_width),
      spec.interact);
}

Index CovariateBasis::size() const {
  if (!expand_column_) return 1 + covariates_;
  const Index others = covariates_ - 1;
  const Index nb = expansion_.size();
  return 1 + others + nb + (interact_ ? others * nb : 0);
}

Index CovariateBasis::modifier_size() const {
  return expand_column_ ? 1 + expansion_.size() : 1;
}

void CovariateBasis::features(const Eigen::Ref<const VectorXd>& x,
                              Eigen::Ref<VectorXd> out) const {
  if (x.size() != covariates_) throw DimensionError("covariate vector has wrong length");
  out(0) = 1.0;
  if (!expand_column_) {
    out.segment(1, covariates_) = x;
    return;
  }
  const int e = *expand_column_;
  Index pos = 1;
  for (Index j = 0; j < covariates_; ++j) {
    if (j != e) out(pos++) = x(j);
  }
  const Index nb = expansion_.size();
  expansion_.evaluate(x(e), out.segment(pos, nb));
  const Index bstart = pos;
  pos += nb;
  if (!interact_) return;
  for (Index j = 0; j < covariates_; ++j) {
    if (j == e) continue;
    const double xj = x(j);
    for (Index b = 0; b < nb; ++b) out(pos++) = xj * out(bstart + b);
  }
}

MatrixXd CovariateBasis::features(const MatrixXd& x) const {
  MatrixXd out(x.rows(), size());
  VectorXd row(size());
  for (Index i = 0; i < x.rows(); ++i) {
    features(x.row(i).transpose(), row);
    out.row(i) = row.transpose();
  }
  return out;
}

void CovariateBasis::modifiers(const Eigen::Ref<const VectorXd>& x,
                               Eigen::Ref<VectorXd> out) const {
  out(0) = 1.0;
  if (expand_column_) expansion_.evaluate(x(*expand_column_), out.segment(1, expansion_.size()));
}

MatrixXd CovariateBasis::modifiers(const MatrixXd& x) const {
  MatrixXd out(x.rows(), modifier_size());
  VectorXd row(modifier_size());
  for (Index i = 0; i < x.rows(); ++i) {
    modifiers(x.row(i).transpose(), row);
    out.row(i) = row.transpose();
  }
  return out;
}

}  // namespace modeiv
