#include "modeiv/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "modeiv/csv_writer.hpp"
#include "modeiv/error.hpp"
#include "modeiv/random.hpp"

namespace modeiv {

namespace {

std::vector<std::string> default_names(const char* prefix, Index count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    names.push_back(std::string(prefix) + "_" + std::to_string(i + 1));
  }
  return names;
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& values,
                    const char* column) {
  for (Index j = 0; j < values.cols(); ++j) {
    for (Index i = 0; i < values.rows(); ++i) {
      if (!std::isfinite(values(i, j))) {
        std::ostringstream msg;
        msg << "non-finite value in " << column << " at row " << i;
        if (values.cols() > 1) msg << ", column " << j;
        throw ParseError(msg.str());
      }
    }
  }
}

}  // namespace

Dataset::Dataset(VectorXd y, VectorXd t, MatrixXd x, MatrixXd z,
                 std::vector<std::string> x_names,
                 std::vector<std::string> z_names)
    : y_(std::move(y)),
      t_(std::move(t)),
      x_(std::move(x)),
      z_(std::move(z)),
      x_names_(std::move(x_names)),
      z_names_(std::move(z_names)) {
  const Index n = y_.size();
  if (n < 1) throw DimensionError("dataset must have at least one row");
  if (t_.size() != n || x_.rows() != n || z_.rows() != n) {
    throw DimensionError("dataset columns have unequal lengths");
  }
  if (z_.cols() < 1) throw DimensionError("dataset needs at least one instrument");
  require_finite(y_, "y");
  require_finite(t_, "t");
  require_finite(x_, "x");
  require_finite(z_, "z");
  if (x_names_.empty()) x_names_ = default_names("x", x_.cols());
  if (z_names_.empty()) z_names_ = default_names("z", z_.cols());
  if (static_cast<Index>(x_names_.size()) != x_.cols() ||
      static_cast<Index>(z_names_.size()) != z_.cols()) {
    throw DimensionError("column name count does not match column count");
  }
}

Dataset Dataset::rows(std::span<const Index> indices) const {
  const auto m = static_cast<Index>(indices.size());
  VectorXd y(m), t(m);
  MatrixXd x(m, d()), z(m, k());
  for (Index r = 0; r < m; ++r) {
    const Index i = indices[static_cast<std::size_t>(r)];
    if (i < 0 || i >= n()) throw DimensionError("row index out of range");
    y(r) = y_(i);
    t(r) = t_(i);
    x.row(r) = x_.row(i);
    z.row(r) = z_.row(i);
  }
  return Dataset(std::move(y), std::move(t), std::move(x), std::move(z),
                 x_names_, z_names_);
}

SplitIndices split_indices(Index n, const SplitSpec& spec) {
  const auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_unit(spec.train_fraction) || !in_unit(spec.validation_fraction)) {
    throw ConfigError("split fractions must lie in (0, 1)");
  }
  if (spec.train_fraction + spec.validation_fraction > 1.0 + 1e-12) {
    throw ConfigError("split fractions sum to more than 1");
  }
  // The small offset keeps products like 0.29 * 100 from flooring to 28.
  const auto part = [n](double f) {
    return static_cast<Index>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const Index n_train = part(spec.train_fraction);
  const Index n_val = part(spec.validation_fraction);
  if (n_train < 1 || n_val < 1) {
    throw ConfigError("dataset too small: each split part needs at least one row");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(spec.seed, "split");
  rng.shuffle(std::span<Index>(order));

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

DatasetSplit split(const Dataset& data, const SplitSpec& spec) {
  auto indices = split_indices(data.n(), spec);
  Dataset train = data.rows(indices.train);
  std::optional<Dataset> validation;
  std::optional<Dataset> test;
  if (!indices.validation.empty()) validation = data.rows(indices.validation);
  if (!indices.test.empty()) test = data.rows(indices.test);
  return DatasetSplit{std::move(indices), std::move(train), std::move(validation),
                      std::move(test)};
}

Schema schema_from_header(std::span<const std::string> header) {
  Schema schema;
  for (const auto& name : header) {
    ColumnRole role = ColumnRole::ignore;
    if (name == "y") {
      role = ColumnRole::outcome;
    } else if (name == "t") {
      role = ColumnRole::treatment;
    } else if (name.rfind("x_", 0) == 0) {
      role = ColumnRole::covariate;
    } else if (name.rfind("z_", 0) == 0) {
      role = ColumnRole::instrument;
    }
    schema.emplace_back(name, role);
  }
  return schema;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header row");
  const auto header = split_csv_line(line);

  // Map every file column to a role; every file column must be named.
  std::vector<ColumnRole> roles(header.size(), ColumnRole::ignore);
  std::vector<bool> seen(header.size(), false);
  for (const auto& [name, role] : schema) {
    std::size_t found = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) {
        found = c;
        break;
      }
    }
    if (found == header.size()) {
      throw SchemaError(path.string() + ": schema column '" + name + "' not in file");
    }
    if (seen[found]) throw SchemaError("column '" + name + "' assigned twice");
    seen[found] = true;
    roles[found] = role;
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!seen[c]) {
      throw SchemaError(path.string() + ": column '" + header[c] + "' has no role");
    }
  }
  int y_col = -1, t_col = -1;
  std::vector<std::size_t> x_cols, z_cols;
  std::vector<std::string> x_names, z_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    switch (roles[c]) {
      case ColumnRole::outcome:
        if (y_col >= 0) throw SchemaError("more than one outcome column");
        y_col = static_cast<int>(c);
        break;
      case ColumnRole::treatment:
        if (t_col >= 0) throw SchemaError("more than one treatment column");
        t_col = static_cast<int>(c);
        break;
      case ColumnRole::covariate:
        x_cols.push_back(c);
        x_names.push_back(header[c]);
        break;
      case ColumnRole::instrument:
        z_cols.push_back(c);
        z_names.push_back(header[c]);
        break;
      case ColumnRole::ignore:
        break;
    }
  }
  if (y_col < 0) throw SchemaError(path.string() + ": schema has no outcome (y) column");
  if (t_col < 0) throw SchemaError(path.string() + ": schema has no treatment (t) column");
  if (z_cols.empty()) throw SchemaError(path.string() + ": schema has no instrument column");

  std::vector<std::vector<double>> cells;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    std::vector<double> values(fields.size(), 0.0);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (roles[c] == ColumnRole::ignore) continue;
      const auto& f = fields[c];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ": bad value '" + f + "' at row " +
                         std::to_string(row) + ", column '" + header[c] + "'");
      }
      values[c] = v;
    }
    cells.push_back(std::move(values));
  }
  const auto n = static_cast<Index>(cells.size());
  if (n == 0) throw ParseError(path.string() + ": no data rows");
  VectorXd y(n), t(n);
  MatrixXd x(n, static_cast<Index>(x_cols.size()));
  MatrixXd z(n, static_cast<Index>(z_cols.size()));
  for (Index i = 0; i < n; ++i) {
    const auto& r = cells[static_cast<std::size_t>(i)];
    y(i) = r[static_cast<std::size_t>(y_col)];
    t(i) = r[static_cast<std::size_t>(t_col)];
    for (std::size_t j = 0; j < x_cols.size(); ++j) x(i, static_cast<Index>(j)) = r[x_cols[j]];
    for (std::size_t j = 0; j < z_cols.size(); ++j) z(i, static_cast<Index>(j)) = r[z_cols[j]];
  }
  return Dataset(std::move(y), std::move(t), std::move(x), std::move(z),
                 std::move(x_names), std::move(z_names));
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header row");
  const auto header = split_csv_line(line);
  return load_csv(path, schema_from_header(header));
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::string out = "y,t";
  for (Index j = 0; j < data.d(); ++j) out += ",x_" + std::to_string(j + 1);
  for (Index j = 0; j < data.k(); ++j) out += ",z_" + std::to_string(j + 1);
  out += '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out += format_double(data.y()(i));
    out += ',';
    out += format_double(data.t()(i));
    for (Index j = 0; j < data.d(); ++j) {
      out += ',';
      out += format_double(data.x()(i, j));
    }
    for (Index j = 0; j < data.k(); ++j) {
      out += ',';
      out += format_double(data.z()(i, j));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace modeiv
