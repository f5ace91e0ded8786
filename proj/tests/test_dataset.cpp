#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "modeiv/csv_writer.hpp"
#include "modeiv/dataset.hpp"
#include "modeiv/error.hpp"
#include "modeiv/random.hpp"

using namespace modeiv;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "modeiv_test_dataset";
  fs::create_directories(dir);
  return dir;
}

Dataset random_dataset(Rng& rng, Index n, Index d, Index k) {
  VectorXd y(n), t(n);
  MatrixXd x(n, d), z(n, k);
  // Mix scales so the text format is exercised on tiny and huge magnitudes.
  auto draw = [&rng] {
    const double scale = std::pow(10.0, rng.uniform(-12, 12));
    return rng.normal() * scale;
  };
  for (Index i = 0; i < n; ++i) {
    y(i) = draw();
    t(i) = draw();
    for (Index c = 0; c < d; ++c) x(i, c) = draw();
    for (Index c = 0; c < k; ++c) z(i, c) = draw();
  }
  return Dataset(y, t, x, z);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("construction rejects bad shapes") {
  CHECK_THROWS_AS(Dataset(VectorXd(0), VectorXd(0), MatrixXd(0, 0), MatrixXd(0, 1)),
                  DimensionError);
  CHECK_THROWS_AS(Dataset(VectorXd::Ones(3), VectorXd::Ones(2), MatrixXd(3, 0),
                          MatrixXd::Ones(3, 1)),
                  DimensionError);
  CHECK_THROWS_AS(Dataset(VectorXd::Ones(3), VectorXd::Ones(3), MatrixXd(3, 0),
                          MatrixXd(3, 0)),
                  DimensionError);
}

TEST_CASE("construction rejects any injected non-finite value") {
  Rng rng(1, "nan");
  const double bad[] = {std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity()};
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = 5, d = 2, k = 3;
    VectorXd y = VectorXd::Ones(n), t = VectorXd::Ones(n);
    MatrixXd x = MatrixXd::Ones(n, d), z = MatrixXd::Ones(n, k);
    const double v = bad[trial % 3];
    const Index row = static_cast<Index>(rng.index(n));
    switch (rng.index(4)) {
      case 0: y(row) = v; break;
      case 1: t(row) = v; break;
      case 2: x(row, static_cast<Index>(rng.index(d))) = v; break;
      default: z(row, static_cast<Index>(rng.index(k))) = v; break;
    }
    CHECK_THROWS_AS(Dataset(y, t, x, z), ParseError);
  }
}

TEST_CASE("save_csv writes the canonical header and body") {
  Dataset data(VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 1.0), MatrixXd(1, 0),
               MatrixXd::Zero(1, 1));
  const auto path = temp_dir() / "tiny.csv";
  save_csv(data, path);
  CHECK(read_file(path) == "y,t,z_1\n2,1,0\n");
}

TEST_CASE("load_csv binds columns by schema") {
  const auto path = temp_dir() / "four.csv";
  write_text(path, "y,t,x1,z1\n1,2,3,4\n5,6,7,8\n9,10,11,12\n13,14,15,16\n");
  const Schema schema{{"y", ColumnRole::outcome},
                      {"t", ColumnRole::treatment},
                      {"x1", ColumnRole::covariate},
                      {"z1", ColumnRole::instrument}};
  const auto data = load_csv(path, schema);
  CHECK(data.n() == 4);
  CHECK(data.d() == 1);
  CHECK(data.k() == 1);
  CHECK(data.y()(3) == 13);
  CHECK(data.z()(1, 0) == 8);

  const Schema no_y{{"t", ColumnRole::treatment},
                    {"x1", ColumnRole::covariate},
                    {"z1", ColumnRole::instrument},
                    {"y", ColumnRole::ignore}};
  CHECK_THROWS_AS(load_csv(path, no_y), SchemaError);
  const Schema missing{{"y", ColumnRole::outcome}, {"w", ColumnRole::treatment}};
  CHECK_THROWS_AS(load_csv(path, missing), SchemaError);
}

TEST_CASE("load_csv reports bad cells by row and column") {
  const auto path = temp_dir() / "bad.csv";
  write_text(path, "y,t,z_1\n1,2,3\n1,abc,3\n");
  try {
    load_csv(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("abc") != std::string::npos);
    CHECK(msg.find("row") != std::string::npos);
  }
  write_text(path, "y,t,z_1\n1,nan,3\n");
  CHECK_THROWS_AS(load_csv(path), ParseError);
  CHECK_THROWS_AS(load_csv(temp_dir() / "does_not_exist.csv"), IoError);
}

TEST_CASE("CSV round trip preserves every cell") {
  Rng rng(42, "roundtrip");
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.index(30));
    const Index d = static_cast<Index>(rng.index(4));
    const Index k = 1 + static_cast<Index>(rng.index(4));
    const auto data = random_dataset(rng, n, d, k);
    const auto path = temp_dir() / "rt.csv";
    save_csv(data, path);
    const auto back = load_csv(path);
    REQUIRE(back.n() == n);
    REQUIRE(back.d() == d);
    REQUIRE(back.k() == k);
    const auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
    };
    bool ok = true;
    for (Index i = 0; i < n; ++i) {
      ok = ok && close(data.y()(i), back.y()(i)) && close(data.t()(i), back.t()(i));
      for (Index c = 0; c < d; ++c) ok = ok && close(data.x()(i, c), back.x()(i, c));
      for (Index c = 0; c < k; ++c) ok = ok && close(data.z()(i, c), back.z()(i, c));
    }
    CHECK(ok);
  }
}

TEST_CASE("format_double round-trips exactly") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-300, 300));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("split sizes follow floor of fractions") {
  const auto s = split_indices(100, SplitSpec{0.9, 0.1, 3});
  CHECK(s.train.size() == 90);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.empty());

  const auto s2 = split_indices(101, SplitSpec{0.5, 0.25, 3});
  CHECK(s2.train.size() == 50);
  CHECK(s2.validation.size() == 25);
  CHECK(s2.test.size() == 26);
}

TEST_CASE("split rejects bad fractions") {
  CHECK_THROWS_AS(split_indices(100, SplitSpec{0.0, 0.1, 0}), ConfigError);
  CHECK_THROWS_AS(split_indices(100, SplitSpec{0.9, 1.0, 0}), ConfigError);
  CHECK_THROWS_AS(split_indices(100, SplitSpec{0.8, 0.3, 0}), ConfigError);
  CHECK_THROWS_AS(split_indices(3, SplitSpec{0.9, 0.1, 0}), ConfigError);
}

TEST_CASE("split is a deterministic disjoint partition") {
  Rng rng(5, "split-property");
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 20 + static_cast<Index>(rng.index(500));
    const double train = rng.uniform(0.1, 0.8);
    const double val = rng.uniform(0.05, 1.0 - train);
    const SplitSpec spec{train, val, rng.next_u64()};
    const auto a = split_indices(n, spec);
    const auto b = split_indices(n, spec);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);

    std::vector<Index> all;
    all.insert(all.end(), a.train.begin(), a.train.end());
    all.insert(all.end(), a.validation.begin(), a.validation.end());
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    bool exhaustive = static_cast<Index>(all.size()) == n;
    for (Index i = 0; exhaustive && i < n; ++i) exhaustive = all[i] == i;
    CHECK(exhaustive);
  }
}

TEST_CASE("split datasets carry the selected rows") {
  Rng rng(8);
  const auto data = random_dataset(rng, 40, 2, 2);
  const auto parts = split(data, SplitSpec{0.5, 0.25, 1});
  REQUIRE(parts.validation.has_value());
  REQUIRE(parts.test.has_value());
  for (std::size_t i = 0; i < parts.indices.train.size(); ++i) {
    CHECK(parts.train.y()(static_cast<Index>(i)) == data.y()(parts.indices.train[i]));
  }
  CHECK(parts.test->n() == 10);
}
