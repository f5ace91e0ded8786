#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "modeiv/estimators.hpp"
#include "modeiv/simulators.hpp"

namespace modeiv {

/// `key = value` lines; blank lines and `#` comments ignored.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated integers.
  std::vector<int> get_int_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return values_; }
  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);
std::vector<int> parse_int_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

using SimulationConfig = std::variant<DemandConfig, MRConfig>;

/// Valid indices are written 1-based.
std::string to_text(const DemandConfig& config);
std::string to_text(const MRConfig& config);
std::string to_text(const SimulationConfig& config);
SimulationConfig parse_simulation_config(const KeyValues& kv);

/// JSON document holding the generating parameters of a truth oracle.
std::string truth_to_json(const TruthOracle& truth);
TruthOracle truth_from_json(const std::string& text);

std::string estimator_to_json(const FittedEstimator& estimator);
FittedEstimator estimator_from_json(const std::string& text);

/// Writes one estimator document per member plus manifest.json.
void save_ensemble(const std::vector<FittedEstimator>& estimators,
                   const std::filesystem::path& directory);
std::vector<FittedEstimator> load_ensemble(const std::filesystem::path& directory);

}  // namespace modeiv
