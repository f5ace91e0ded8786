#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace modeiv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Immutable table of outcome y, treatment t, covariates x (n x d) and
/// candidate instruments z (n x k).
///
/// Construction rejects mismatched lengths, n < 1, k < 1 and any non-finite
/// cell, so every consumer may assume clean finite input.
class Dataset {
 public:
  Dataset(VectorXd y, VectorXd t, MatrixXd x, MatrixXd z,
          std::vector<std::string> x_names = {},
          std::vector<std::string> z_names = {});

  Index n() const { return y_.size(); }
  Index d() const { return x_.cols(); }
  Index k() const { return z_.cols(); }

  const VectorXd& y() const { return y_; }
  const VectorXd& t() const { return t_; }
  const MatrixXd& x() const { return x_; }
  const MatrixXd& z() const { return z_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::vector<std::string>& z_names() const { return z_names_; }

  /// New dataset holding the given rows, in the given order.
  Dataset rows(std::span<const Index> indices) const;

 private:
  VectorXd y_;
  VectorXd t_;
  MatrixXd x_;
  MatrixXd z_;
  std::vector<std::string> x_names_;
  std::vector<std::string> z_names_;
};

/// A point at which a fitted effect function is evaluated. `z` is only
/// consulted by estimators that condition on other instruments.
struct TestPoint {
  double t = 0.0;
  VectorXd x;
  std::optional<VectorXd> z;
};

struct SplitSpec {
  double train_fraction = 0.9;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
};

struct DatasetSplit {
  SplitIndices indices;
  Dataset train;
  std::optional<Dataset> validation;
  std::optional<Dataset> test;
};

/// Seeded row partition. Part sizes are floor(fraction * n); the remainder
/// goes to test.
SplitIndices split_indices(Index n, const SplitSpec& spec);
DatasetSplit split(const Dataset& data, const SplitSpec& spec);

enum class ColumnRole { outcome, treatment, covariate, instrument, ignore };

/// Column name to role, one entry per file column.
using Schema = std::vector<std::pair<std::string, ColumnRole>>;

/// Roles from canonical names: y, t, x_*, z_*; anything else is ignored.
Schema schema_from_header(std::span<const std::string> header);

Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
/// load_csv with schema_from_header applied to the file's own header.
Dataset load_csv(const std::filesystem::path& path);

/// Writes `y,t,x_1..x_d,z_1..z_k` with shortest round-trip decimal text.
void save_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace modeiv
