#include "modeiv/serialize.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "modeiv/csv_writer.hpp"
#include "modeiv/error.hpp"

namespace modeiv {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(what + ": '" + text + "' is not a number");
  }
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(what + ": '" + text + "' is not an integer");
  }
  return v;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split_commas(text)) out.push_back(static_cast<int>(parse_int(item, what)));
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_commas(text)) out.push_back(parse_double(item, what));
  return out;
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const std::string& KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_double(get(key), key) : fallback;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  return has(key) ? parse_int(get(key), key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string s = trim(get(key));
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(key + ": '" + s + "' is not an unsigned integer");
  }
  return v;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<int> KeyValues::get_int_list(const std::string& key) const {
  return has(key) ? parse_int_list(get(key), key) : std::vector<int>{};
}

void KeyValues::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError("unknown config key '" + key + "'");
  }
}

namespace {

std::string join_one_based(const std::vector<int>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(indices[i] + 1);
  }
  return out;
}

}  // namespace

std::string to_text(const DemandConfig& c) {
  std::ostringstream os;
  os << "dgp = demand\n"
     << "n = " << c.n << "\n"
     << "k = " << c.k << "\n"
     << "valid = " << join_one_based(c.valid_indices()) << "\n"
     << "gamma = " << format_double(c.gamma) << "\n"
     << "rho = " << format_double(c.rho) << "\n"
     << "param_seed = " << c.param_seed << "\n"
     << "noise_seed = " << c.noise_seed << "\n"
     << "p_std = " << format_double(c.p_std) << "\n"
     << "p_mu = " << format_double(c.p_mu) << "\n"
     << "y_std = " << format_double(c.y_std) << "\n"
     << "y_mu = " << format_double(c.y_mu) << "\n"
     << "zero_noise = " << (c.zero_noise ? "true" : "false") << "\n";
  return os.str();
}

std::string to_text(const MRConfig& c) {
  std::ostringstream os;
  os << "dgp = mr\n"
     << "n = " << c.n << "\n"
     << "K = " << c.K << "\n"
     << "n_valid = " << c.n_valid << "\n"
     << "rho = " << format_double(c.rho) << "\n"
     << "u_variance = " << format_double(c.u_variance) << "\n"
     << "param_seed = " << c.param_seed << "\n"
     << "noise_seed = " << c.noise_seed << "\n"
     << "pilot_size = " << c.pilot_size << "\n"
     << "zero_noise = " << (c.zero_noise ? "true" : "false") << "\n";
  return os.str();
}

std::string to_text(const SimulationConfig& config) {
  return std::visit([](const auto& c) { return to_text(c); }, config);
}

SimulationConfig parse_simulation_config(const KeyValues& kv) {
  const std::string dgp = kv.get("dgp");
  if (dgp == "demand") {
    kv.require_known({"dgp", "n", "k", "valid", "gamma", "rho", "param_seed", "noise_seed",
                      "p_std", "p_mu", "y_std", "y_mu", "zero_noise"});
    DemandConfig c;
    c.n = kv.get_int("n", c.n);
    c.k = static_cast<int>(kv.get_int("k", c.k));
    for (int v : kv.get_int_list("valid")) c.valid.push_back(v - 1);
    c.gamma = kv.get_double("gamma", c.gamma);
    c.rho = kv.get_double("rho", c.rho);
    c.param_seed = kv.get_u64("param_seed", c.param_seed);
    c.noise_seed = kv.get_u64("noise_seed", c.noise_seed);
    c.p_std = kv.get_double("p_std", c.p_std);
    c.p_mu = kv.get_double("p_mu", c.p_mu);
    c.y_std = kv.get_double("y_std", c.y_std);
    c.y_mu = kv.get_double("y_mu", c.y_mu);
    c.zero_noise = kv.get_bool("zero_noise", c.zero_noise);
    c.validate();
    return c;
  }
  if (dgp == "mr") {
    kv.require_known({"dgp", "n", "K", "n_valid", "rho", "u_variance", "param_seed",
                      "noise_seed", "pilot_size", "zero_noise"});
    MRConfig c;
    c.n = kv.get_int("n", c.n);
    c.K = static_cast<int>(kv.get_int("K", c.K));
    c.n_valid = static_cast<int>(kv.get_int("n_valid", c.n_valid));
    c.rho = kv.get_double("rho", c.rho);
    c.u_variance = kv.get_double("u_variance", c.u_variance);
    c.param_seed = kv.get_u64("param_seed", c.param_seed);
    c.noise_seed = kv.get_u64("noise_seed", c.noise_seed);
    c.pilot_size = kv.get_int("pilot_size", c.pilot_size);
    c.zero_noise = kv.get_bool("zero_noise", c.zero_noise);
    c.validate();
    return c;
  }
  throw ConfigError("unknown dgp '" + dgp + "' (expected demand or mr)");
}

namespace {

json vec_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

VectorXd json_vec(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

json mat_json(const MatrixXd& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

MatrixXd json_mat(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (static_cast<Index>(j[static_cast<std::size_t>(r)].size()) != cols) {
      throw ParseError("ragged matrix in estimator document");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

// JSON has no infinities; a perfect first stage reports F = inf.
json real_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double json_real(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ParseError("bad real value '" + s + "'");
}

json univariate_json(const UnivariateBasis& b) {
  return {{"lo", b.lo()}, {"hi", b.hi()}, {"degree", b.degree()}, {"bumps", b.bumps()},
          {"bump_width", b.bump_width()}};
}

UnivariateBasis json_univariate(const json& j) {
  return UnivariateBasis(j.at("lo").get<double>(), j.at("hi").get<double>(),
                         j.at("degree").get<int>(), j.at("bumps").get<int>(),
                         j.at("bump_width").get<double>());
}

json spec_json(const EstimatorSpec& s) {
  json basis = {{"degree", s.basis.degree},
                {"bumps", s.basis.bumps},
                {"bump_width", s.basis.bump_width},
                {"interact", s.basis.interact}};
  basis["expand_column"] = s.basis.expand_column ? json(*s.basis.expand_column) : json(nullptr);
  json out = {{"kind", to_string(s.kind)},
              {"basis", basis},
              {"weak_instrument_threshold", s.weak_instrument_threshold},
              {"second_stage", to_string(s.second_stage)}};
  out["ridge_lambda"] = s.ridge_lambda ? json(*s.ridge_lambda) : json(nullptr);
  out["ridge_per_row"] = s.ridge_per_row;
  return out;
}

EstimatorSpec json_spec(const json& j) {
  EstimatorSpec s;
  s.kind = parse_estimator_kind(j.at("kind").get<std::string>());
  const json& b = j.at("basis");
  s.basis.degree = b.at("degree").get<int>();
  s.basis.bumps = b.at("bumps").get<int>();
  s.basis.bump_width = b.at("bump_width").get<double>();
  s.basis.interact = b.at("interact").get<bool>();
  if (!b.at("expand_column").is_null()) s.basis.expand_column = b.at("expand_column").get<int>();
  if (!j.at("ridge_lambda").is_null()) s.ridge_lambda = j.at("ridge_lambda").get<double>();
  s.ridge_per_row = j.value("ridge_per_row", kDefaultRidgePerRow);
  s.weak_instrument_threshold = j.at("weak_instrument_threshold").get<double>();
  s.second_stage = parse_second_stage(j.value("second_stage", std::string("plug_in")));
  return s;
}

}  // namespace

std::string truth_to_json(const TruthOracle& truth) {
  json doc;
  doc["valid"] = truth.valid();
  if (truth.kind() == DgpKind::demand) {
    const auto& d = truth.demand();
    doc["kind"] = "demand";
    doc["beta_zp"] = vec_json(d.beta_zp);
    doc["beta_zy"] = vec_json(d.beta_zy);
    doc["gamma"] = d.gamma;
    doc["p_std"] = d.p_std;
    doc["p_mu"] = d.p_mu;
    doc["y_std"] = d.y_std;
    doc["y_mu"] = d.y_mu;
  } else {
    const auto& m = truth.mr();
    doc["kind"] = "mr";
    doc["p"] = vec_json(m.p);
    doc["nu_x"] = vec_json(m.nu_x);
    doc["nu_y"] = vec_json(m.nu_y);
    doc["alpha"] = vec_json(m.alpha);
    doc["delta"] = vec_json(m.delta);
    doc["gamma_xt"] = vec_json(m.gamma_xt);
    doc["sigma_zx"] = m.sigma_zx;
    doc["sigma_zy"] = m.sigma_zy;
    doc["rho"] = m.rho;
    doc["sigma_u"] = m.sigma_u;
    doc["sigma_x"] = m.sigma_x;
    doc["sigma_y"] = m.sigma_y;
  }
  return doc.dump(2) + "\n";
}

TruthOracle truth_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    const auto valid = doc.at("valid").get<std::vector<int>>();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "demand") {
      DemandParameters d;
      d.beta_zp = json_vec(doc.at("beta_zp"));
      d.beta_zy = json_vec(doc.at("beta_zy"));
      d.gamma = doc.at("gamma").get<double>();
      d.p_std = doc.at("p_std").get<double>();
      d.p_mu = doc.at("p_mu").get<double>();
      d.y_std = doc.at("y_std").get<double>();
      d.y_mu = doc.at("y_mu").get<double>();
      return TruthOracle(std::move(d), valid);
    }
    if (kind == "mr") {
      MRParameters m;
      m.p = json_vec(doc.at("p"));
      m.nu_x = json_vec(doc.at("nu_x"));
      m.nu_y = json_vec(doc.at("nu_y"));
      m.alpha = json_vec(doc.at("alpha"));
      m.delta = json_vec(doc.at("delta"));
      m.gamma_xt = json_vec(doc.at("gamma_xt"));
      m.sigma_zx = doc.at("sigma_zx").get<double>();
      m.sigma_zy = doc.at("sigma_zy").get<double>();
      m.rho = doc.at("rho").get<double>();
      m.sigma_u = doc.at("sigma_u").get<double>();
      m.sigma_x = doc.at("sigma_x").get<double>();
      m.sigma_y = doc.at("sigma_y").get<double>();
      return TruthOracle(std::move(m), valid);
    }
    throw ParseError("unknown truth kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("truth document: ") + e.what());
  }
}

std::string estimator_to_json(const FittedEstimator& e) {
  json doc;
  doc["spec"] = spec_json(e.spec());
  doc["instruments"] = e.instruments();
  doc["controls"] = e.controls();
  doc["control_means"] = vec_json(e.control_means());
  doc["covariates"] = e.covariates();
  doc["instrument_count"] = e.instrument_count();
  const auto& cb = e.covariate_basis();
  json cov = {{"covariates", cb.covariates()}, {"interact", cb.interact()}};
  cov["expand_column"] = cb.expand_column() ? json(*cb.expand_column()) : json(nullptr);
  if (cb.expand_column()) cov["expansion"] = univariate_json(cb.expansion());
  doc["covariate_basis"] = cov;
  if (e.kind() == EstimatorKind::sieve) {
    doc["treatment_basis"] = univariate_json(e.treatment_basis());
    doc["instrument_center"] = vec_json(e.instrument_center());
    doc["instrument_scale"] = vec_json(e.instrument_scale());
  }
  doc["first_stage"] = mat_json(e.first_stage());
  doc["second_stage"] = vec_json(e.second_stage());
  const auto& d = e.diagnostics();
  doc["diagnostics"] = {{"first_stage_f", real_json(d.first_stage_f)},
                        {"first_stage_partial_r2", d.first_stage_partial_r2},
                        {"first_stage_residual_variance", d.first_stage_residual_variance},
                        {"second_stage_residual_variance", d.second_stage_residual_variance},
                        {"instrument_strength", d.instrument_strength},
                        {"n_train", d.n_train},
                        {"ridge_lambda", d.ridge_lambda}};
  return doc.dump(1) + "\n";
}

FittedEstimator estimator_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    FittedEstimator::Parts p;
    p.spec = json_spec(doc.at("spec"));
    p.instruments = doc.at("instruments").get<std::vector<int>>();
    p.controls = doc.at("controls").get<std::vector<int>>();
    p.control_means = json_vec(doc.at("control_means"));
    p.covariates = doc.at("covariates").get<Index>();
    p.instrument_count = doc.at("instrument_count").get<Index>();
    const json& cov = doc.at("covariate_basis");
    std::optional<int> expand;
    UnivariateBasis expansion;
    if (!cov.at("expand_column").is_null()) {
      expand = cov.at("expand_column").get<int>();
      expansion = json_univariate(cov.at("expansion"));
    }
    p.covariate_basis = CovariateBasis(cov.at("covariates").get<Index>(), expand, expansion,
                                       cov.at("interact").get<bool>());
    if (p.spec.kind == EstimatorKind::sieve) {
      p.treatment_basis = json_univariate(doc.at("treatment_basis"));
      p.instrument_center = json_vec(doc.at("instrument_center"));
      p.instrument_scale = json_vec(doc.at("instrument_scale"));
    }
    p.first_stage = json_mat(doc.at("first_stage"));
    p.second_stage = json_vec(doc.at("second_stage"));
    const json& d = doc.at("diagnostics");
    p.diagnostics.first_stage_f = json_real(d.at("first_stage_f"));
    p.diagnostics.first_stage_partial_r2 = d.at("first_stage_partial_r2").get<double>();
    p.diagnostics.first_stage_residual_variance = d.at("first_stage_residual_variance").get<double>();
    p.diagnostics.second_stage_residual_variance = d.at("second_stage_residual_variance").get<double>();
    p.diagnostics.instrument_strength = d.at("instrument_strength").get<double>();
    p.diagnostics.n_train = d.at("n_train").get<Index>();
    p.diagnostics.ridge_lambda = d.at("ridge_lambda").get<double>();
    return FittedEstimator(std::move(p));
  } catch (const json::exception& e) {
    throw ParseError(std::string("estimator document: ") + e.what());
  }
}

void save_ensemble(const std::vector<FittedEstimator>& estimators,
                   const std::filesystem::path& directory) {
  json manifest;
  manifest["estimators"] = json::array();
  for (const auto& e : estimators) {
    const std::string name = "estimator_z" + std::to_string(e.instrument() + 1) + ".json";
    write_file_atomic(directory / name, estimator_to_json(e));
    manifest["estimators"].push_back(name);
  }
  write_file_atomic(directory / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<FittedEstimator> load_ensemble(const std::filesystem::path& directory) {
  json manifest;
  try {
    manifest = json::parse(read_file(directory / "manifest.json"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("ensemble manifest: ") + e.what());
  }
  std::vector<FittedEstimator> out;
  for (const auto& name : manifest.at("estimators")) {
    out.push_back(estimator_from_json(read_file(directory / name.get<std::string>())));
  }
  return out;
}

}  // namespace modeiv
