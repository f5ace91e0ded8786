#include "modeiv/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "modeiv/csv_writer.hpp"
#include "modeiv/error.hpp"

namespace modeiv {

std::string Method::name() const {
  switch (kind) {
    case Kind::modeiv: return "modeiv";
    case Kind::mean_ensemble: return "mean_ensemble";
    case Kind::naive_all: return "naive_all";
    case Kind::oracle_valid: return "oracle_valid";
    case Kind::single: return "single";
  }
  return "unknown";
}

std::string Method::label() const {
  if (kind == Kind::modeiv && V > 0) return "modeiv(" + std::to_string(V) + ")";
  if (kind == Kind::single) return "single(" + std::to_string(instrument + 1) + ")";
  return name();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

int parse_argument(const std::string& text, const std::string& method) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("method '" + method + "': bad argument '" + text + "'");
  }
}

}  // namespace

Method parse_method(std::string_view raw) {
  const std::string text = trim(raw);
  std::string head = text;
  std::optional<std::string> arg;
  if (const auto open = text.find('('); open != std::string::npos) {
    if (text.back() != ')') throw ConfigError("method '" + text + "': missing ')'");
    head = text.substr(0, open);
    arg = text.substr(open + 1, text.size() - open - 2);
  } else if (const auto colon = text.find(':'); colon != std::string::npos) {
    head = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  Method m;
  if (head == "modeiv") {
    m.kind = Method::Kind::modeiv;
    if (arg) {
      m.V = parse_argument(*arg, text);
      if (m.V < 2) throw ConfigError("method '" + text + "': V must be at least 2");
    }
    return m;
  }
  if (head == "single") {
    m.kind = Method::Kind::single;
    if (!arg) throw ConfigError("method 'single' needs an instrument, e.g. single(3)");
    m.instrument = parse_argument(*arg, text) - 1;
    if (m.instrument < 0) throw ConfigError("method '" + text + "': instruments are 1-based");
    return m;
  }
  if (arg) throw ConfigError("method '" + head + "' takes no argument");
  if (head == "mean" || head == "mean_ensemble") m.kind = Method::Kind::mean_ensemble;
  else if (head == "naive" || head == "naive_all") m.kind = Method::Kind::naive_all;
  else if (head == "oracle" || head == "oracle_valid") m.kind = Method::Kind::oracle_valid;
  else
    throw ConfigError("unknown method '" + head +
                      "' (expected modeiv, mean, naive, oracle or single)");
  return m;
}

std::vector<Method> parse_methods(std::string_view comma_separated) {
  std::vector<Method> out;
  std::string current;
  int depth = 0;
  for (char c : comma_separated) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      if (!trim(current).empty()) out.push_back(parse_method(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!trim(current).empty()) out.push_back(parse_method(current));
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Dataset held_out_rows(const Dataset& data, const SplitIndices& idx) {
  std::vector<Index> rows = idx.validation;
  rows.insert(rows.end(), idx.test.begin(), idx.test.end());
  if (rows.empty()) throw ConfigError("split leaves no held-out rows for evaluation");
  return data.rows(rows);
}

}  // namespace

Comparison::Comparison(const Dataset& data, const TruthOracle& truth, ComparisonConfig config,
                       std::uint64_t seed)
    : truth_(truth),
      config_(std::move(config)),
      seed_(seed),
      train_([&] {
        config_.split.seed = seed;
        const SplitIndices idx = split_indices(data.n(), config_.split);
        return data.rows(idx.train);
      }()),
      held_out_(held_out_rows(data, split_indices(data.n(), config_.split))),
      grid_(build_grid(config_.grid, train_.t(), held_out_)) {
  if (truth.instrument_count() != data.k() || truth.covariate_count() != data.d()) {
    throw DimensionError("truth oracle does not match the dataset schema");
  }
  const std::span<const double> t(train_.t().data(), static_cast<std::size_t>(train_.n()));
  probe_ = {percentile(t, config_.cate_lo_pct), percentile(t, config_.cate_hi_pct)};
  if (probe_.first == probe_.second) throw ConfigError("CATE probe percentiles coincide");

  truth_grid_.resize(grid_.size());
  for (Index p = 0; p < grid_.size(); ++p) {
    truth_grid_(p) = truth_value(truth_, grid_.point(p), config_.target);
  }
  truth_slope_.resize(grid_.x.rows());
  for (Index r = 0; r < grid_.x.rows(); ++r) truth_slope_(r) = truth_.slope(grid_.x.row(r).transpose());
}

const EnsembleFit& Comparison::ensemble() {
  if (!ensemble_) {
    const auto start = Clock::now();
    EnsembleFitConfig fit;
    fit.spec = config_.spec;
    fit.conditioning = config_.conditioning;
    fit.skip_failed = config_.skip_failed;
    try {
      ensemble_ = fit_ensemble(train_, fit);
    } catch (const Error& e) {
      throw Error(std::string("ensemble fit: ") + e.what());
    }
    ensemble_seconds_ = seconds_since(start);
  }
  return *ensemble_;
}

void Comparison::set_ensemble(std::vector<FittedEstimator> estimators) {
  for (const auto& e : estimators) {
    if (e.covariates() != train_.d() || e.instrument_count() != train_.k()) {
      throw DimensionError("saved estimator for z_" + std::to_string(e.instrument() + 1) +
                           " does not match the dataset schema");
    }
  }
  ensemble_ = EnsembleFit{std::move(estimators), {}};
  ensemble_seconds_ = 0.0;
  members_ready_ = false;
}

void Comparison::prepare_members() {
  if (members_ready_) return;
  const auto& members = ensemble().estimators;
  const auto k = static_cast<Index>(members.size());
  const Index rows = grid_.x.rows();
  const Index nt = grid_.treatments.size();
  member_grid_.resize(grid_.size(), k);
  member_t1_.resize(rows, k);
  member_t2_.resize(rows, k);
  for (Index r = 0; r < rows; ++r) {
    const TestPoint row{0.0, grid_.x.row(r).transpose(), VectorXd(grid_.z.row(r).transpose())};
    const VectorXd x = row.x;
    for (Index j = 0; j < k; ++j) {
      const auto& e = members[static_cast<std::size_t>(j)];
      const VectorXd values = e.predict_many(grid_.treatments, row);
      for (Index ti = 0; ti < nt; ++ti) member_grid_(ti * rows + r, j) = values(ti);
      member_t1_(r, j) = e.predict(TestPoint{probe_.first, x, std::nullopt});
      member_t2_(r, j) = e.predict(TestPoint{probe_.second, x, std::nullopt});
    }
  }
  members_ready_ = true;
}

Comparison::Scores Comparison::score_single(const FittedEstimator& estimator) const {
  const Index rows = grid_.x.rows();
  const Index nt = grid_.treatments.size();
  Scores s;
  double sum = 0.0;
  double cate = 0.0;
  const double dt = probe_.second - probe_.first;
  for (Index r = 0; r < rows; ++r) {
    const TestPoint row{0.0, grid_.x.row(r).transpose(), VectorXd(grid_.z.row(r).transpose())};
    const VectorXd values = estimator.predict_many(grid_.treatments, row);
    for (Index ti = 0; ti < nt; ++ti) {
      const double d = values(ti) - truth_grid_(ti * rows + r);
      sum += d * d;
    }
    const double slope = (estimator.predict(TestPoint{probe_.second, row.x, std::nullopt}) -
                          estimator.predict(TestPoint{probe_.first, row.x, std::nullopt})) / dt;
    cate += std::abs(slope - truth_slope_(r));
  }
  s.mse = sum / static_cast<double>(grid_.size());
  s.cate = cate / static_cast<double>(rows);
  return s;
}

MethodResult Comparison::evaluate(const Method& method) {
  MethodResult out;
  out.method = method;
  out.seed = seed_;
  const auto start = Clock::now();
  const std::string where = "method " + method.label() + ": ";
  try {
    switch (method.kind) {
      case Method::Kind::naive_all:
      case Method::Kind::oracle_valid: {
        std::vector<int> instruments;
        if (method.kind == Method::Kind::oracle_valid) {
          instruments = truth_.valid();
        } else {
          for (int j = 0; j < train_.k(); ++j) instruments.push_back(j);
        }
        const FittedEstimator fit = fit_estimator(train_, instruments, {}, config_.spec);
        const Scores s = score_single(fit);
        out.mse = s.mse;
        out.cate_abs_bias = s.cate;
        break;
      }
      case Method::Kind::single: {
        const auto& members = ensemble().estimators;
        const auto it = std::find_if(members.begin(), members.end(), [&](const FittedEstimator& e) {
          return e.instrument() == method.instrument;
        });
        if (it == members.end()) {
          throw ConfigError("no fitted estimator for instrument z_" +
                            std::to_string(method.instrument + 1));
        }
        const Scores s = score_single(*it);
        out.mse = s.mse;
        out.cate_abs_bias = s.cate;
        out.runtime_seconds += ensemble_seconds_ / static_cast<double>(members.size());
        break;
      }
      case Method::Kind::mean_ensemble:
      case Method::Kind::modeiv: {
        prepare_members();
        const Index k = member_grid_.cols();
        AggregationConfig agg;
        if (method.kind == Method::Kind::modeiv) {
          agg.V = method.V > 0 ? method.V : default_v(k);
          out.V = agg.V;
          if (agg.V > k) {
            throw ConfigError("V = " + std::to_string(agg.V) + " exceeds the " +
                              std::to_string(k) + " fitted estimators");
          }
        }
        auto combine = [&](const MatrixXd& m, Index row) {
          const VectorXd values = m.row(row).transpose();
          if (method.kind == Method::Kind::mean_ensemble) return values.mean();
          return aggregate(std::span<const double>(values.data(), static_cast<std::size_t>(k)), agg);
        };
        double sum = 0.0;
        for (Index p = 0; p < member_grid_.rows(); ++p) {
          const double d = combine(member_grid_, p) - truth_grid_(p);
          sum += d * d;
        }
        out.mse = sum / static_cast<double>(member_grid_.rows());
        double cate = 0.0;
        const double dt = probe_.second - probe_.first;
        for (Index r = 0; r < member_t1_.rows(); ++r) {
          const double slope = (combine(member_t2_, r) - combine(member_t1_, r)) / dt;
          cate += std::abs(slope - truth_slope_(r));
        }
        out.cate_abs_bias = cate / static_cast<double>(member_t1_.rows());
        out.runtime_seconds += ensemble_seconds_;
        break;
      }
    }
  } catch (const Error& e) {
    throw Error(where + e.what());
  }
  out.runtime_seconds += seconds_since(start);
  return out;
}

std::vector<MethodResult> Comparison::evaluate(const std::vector<Method>& methods) {
  std::vector<MethodResult> out;
  for (const auto& m : methods) out.push_back(evaluate(m));
  return out;
}

std::vector<MethodResult> run_comparison(const Dataset& data, const TruthOracle& truth,
                                         const std::vector<Method>& methods,
                                         const ComparisonConfig& config, std::uint64_t seed) {
  Comparison cmp(data, truth, config, seed);
  return cmp.evaluate(methods);
}

std::vector<MethodResult> sensitivity_sweep(const Dataset& data, const TruthOracle& truth,
                                            const std::vector<int>& V_range,
                                            const ComparisonConfig& config, std::uint64_t seed) {
  std::vector<Method> methods;
  for (int V : V_range) {
    if (V < 2 || V > data.k()) {
      throw ConfigError("V = " + std::to_string(V) + " outside [2, " + std::to_string(data.k()) + "]");
    }
    methods.push_back(Method{Method::Kind::modeiv, V, -1});
  }
  return run_comparison(data, truth, methods, config, seed);
}

std::vector<ReportRow> summarize(const std::vector<MethodResult>& results) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : results) {
    Method m = r.method;
    if (m.kind == Method::Kind::modeiv) m.V = r.V;
    const std::string label = m.label();
    if (!groups.count(label)) order.push_back(label);
    groups[label].first.push_back(r.mse);
    groups[label].second.push_back(r.cate_abs_bias);
  }
  std::vector<ReportRow> out;
  for (const auto& label : order) {
    const auto& [mse, cate] = groups[label];
    for (const auto& [metric, values] : {std::pair{"mse", &mse}, std::pair{"cate_abs_bias", &cate}}) {
      ReportRow row;
      row.method = label;
      row.metric = metric;
      row.n_replicates = static_cast<int>(values->size());
      if (values->size() >= 2) {
        const ConfidenceInterval ci = confidence_interval(*values);
        row.mean = ci.mean;
        row.ci_half_width = ci.half_width;
      } else {
        row.mean = values->front();
      }
      out.push_back(row);
    }
  }
  return out;
}

std::string results_csv_header() { return "method,V,seed,gamma,n_invalid,metric,value\n"; }

std::string results_csv_rows(const std::vector<MethodResult>& results, const ResultContext& context) {
  std::ostringstream os;
  const std::string gamma = context.gamma ? format_double(*context.gamma) : "";
  const std::string invalid = context.n_invalid ? std::to_string(*context.n_invalid) : "";
  for (const auto& r : results) {
    const std::string name = r.method.kind == Method::Kind::single ? r.method.label() : r.method.name();
    const std::string v = r.V > 0 ? std::to_string(r.V) : "";
    for (const auto& [metric, value] :
         {std::pair{"mse", r.mse}, std::pair{"cate_abs_bias", r.cate_abs_bias}}) {
      os << name << ',' << v << ',' << r.seed << ',' << gamma << ',' << invalid << ',' << metric
         << ',' << format_double(value) << '\n';
    }
  }
  return os.str();
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "method,metric,mean,ci_half_width,n_replicates\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.metric << ',' << format_double(r.mean) << ','
       << (r.ci_half_width ? format_double(*r.ci_half_width) : "") << ',' << r.n_replicates << '\n';
  }
  return os.str();
}

EstimatorSpec demand_estimator_spec() {
  EstimatorSpec s;
  s.kind = EstimatorKind::cond_linear;
  s.basis.degree = 4;
  s.basis.bumps = 15;
  s.basis.bump_width = 0.5;
  s.basis.expand_column = 0;
  s.basis.interact = true;
  s.second_stage = SecondStage::instrumented;
  s.ridge_per_row = 1e-4;
  return s;
}

EstimatorSpec mr_estimator_spec() {
  EstimatorSpec s;
  s.kind = EstimatorKind::cond_linear;
  s.basis.degree = 1;
  s.basis.bumps = 0;
  s.basis.interact = true;
  s.ridge_per_row = 1e-3;
  // Single variants explain little of t; the ridge, not the F screen, keeps them stable.
  s.weak_instrument_threshold = 0.0;
  return s;
}

namespace {

/// Runs body(i) for i in [0, count) on up to `jobs` threads and rethrows the
/// first failure after all workers stop.
template <typename Body>
void parallel_for(int count, int jobs, Body body) {
  const int workers = std::max(1, std::min(jobs, count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex lock;
  auto run = [&] {
    for (int i = next++; i < count; i = next++) {
      {
        std::lock_guard<std::mutex> guard(lock);
        if (failure) return;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> guard(lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(run);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

ComparisonConfig comparison_config(const ReproduceCommon& common, const EstimatorSpec& fallback) {
  ComparisonConfig c;
  c.spec = common.spec.value_or(fallback);
  c.conditioning = common.conditioning;
  c.skip_failed = common.skip_failed;
  c.split = common.split;
  c.grid = common.grid;
  return c;
}

std::uint64_t replicate_seed(const ReproduceCommon& common, int r) {
  return common.seed + static_cast<std::uint64_t>(r);
}

void check_common(const ReproduceCommon& common) {
  if (common.seeds < 1) throw ConfigError("--seeds must be at least 1");
  if (common.jobs < 1) throw ConfigError("--jobs must be at least 1");
}

std::string plot_header() { return "x_value,group,method,mean,ci\n"; }

std::string plot_row(const std::string& x, const std::string& group, const ReportRow& row) {
  return x + "," + group + "," + row.method + "," + format_double(row.mean) + "," +
         (row.ci_half_width ? format_double(*row.ci_half_width) : "") + "\n";
}

std::string cell_report(const std::string& prefix, const std::vector<ReportRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += prefix + r.method + "," + r.metric + "," + format_double(r.mean) + "," +
           (r.ci_half_width ? format_double(*r.ci_half_width) : "") + "," +
           std::to_string(r.n_replicates) + "\n";
  }
  return out;
}

const std::vector<Method>& comparison_methods() {
  static const std::vector<Method> methods{
      {Method::Kind::modeiv, 0, -1},
      {Method::Kind::mean_ensemble, 0, -1},
      {Method::Kind::naive_all, 0, -1},
      {Method::Kind::oracle_valid, 0, -1},
  };
  return methods;
}

}  // namespace

void reproduce_demand_bias(const ReproduceCommon& common, const DemandBiasOptions& options) {
  check_common(common);
  const ComparisonConfig base = comparison_config(common, demand_estimator_spec());
  std::vector<Method> methods = comparison_methods();
  methods[0].V = options.V;
  for (int inv : options.n_invalid) valid_after_invalid(options.k, inv);

  const std::filesystem::path dir = common.outdir / "demand-bias";
  // results[replicate][cell]
  const std::size_t cells = options.gammas.size() * options.n_invalid.size();
  std::vector<std::vector<std::vector<MethodResult>>> results(
      static_cast<std::size_t>(common.seeds), std::vector<std::vector<MethodResult>>(cells));

  parallel_for(common.seeds, common.jobs, [&](int r) {
    const std::uint64_t seed = replicate_seed(common, r);
    std::string csv = results_csv_header();
    std::size_t cell = 0;
    for (int inv : options.n_invalid) {
      for (double gamma : options.gammas) {
        DemandConfig cfg;
        cfg.n = options.n;
        cfg.k = options.k;
        cfg.valid = valid_after_invalid(options.k, inv);
        cfg.gamma = gamma;
        cfg.rho = options.rho;
        cfg.param_seed = seed;
        cfg.noise_seed = seed;
        const auto [data, truth] = generate_demand(cfg);
        auto res = run_comparison(data, truth, methods, base, seed);
        csv += results_csv_rows(res, {gamma, inv});
        results[static_cast<std::size_t>(r)][cell++] = std::move(res);
      }
    }
    write_file_atomic(dir / std::to_string(seed) / "results.csv", csv);
  });

  std::string report = "gamma,n_invalid,method,metric,mean,ci_half_width,n_replicates\n";
  std::string plot = plot_header();
  std::size_t cell = 0;
  for (int inv : options.n_invalid) {
    for (double gamma : options.gammas) {
      std::vector<MethodResult> pooled;
      for (const auto& rep : results) pooled.insert(pooled.end(), rep[cell].begin(), rep[cell].end());
      ++cell;
      const auto rows = summarize(pooled);
      report += cell_report(format_double(gamma) + "," + std::to_string(inv) + ",", rows);
      for (const auto& row : rows) {
        if (row.metric == "mse") plot += plot_row(format_double(gamma), "n_invalid=" + std::to_string(inv), row);
      }
    }
  }
  write_file_atomic(dir / "report.csv", report);
  write_file_atomic(dir / "plot_data.csv", plot);
}

void reproduce_mr_table(const ReproduceCommon& common, const MRTableOptions& options) {
  check_common(common);
  const ComparisonConfig base = comparison_config(common, mr_estimator_spec());
  std::vector<Method> methods = comparison_methods();
  methods[0].V = options.V;
  std::vector<int> n_valid;
  for (double f : options.valid_fracs) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("valid fractions must lie in (0, 1]");
    n_valid.push_back(std::max(1, static_cast<int>(std::lround(f * options.K))));
  }

  const std::filesystem::path dir = common.outdir / "mr-table";
  std::vector<std::vector<std::vector<MethodResult>>> results(
      static_cast<std::size_t>(common.seeds), std::vector<std::vector<MethodResult>>(n_valid.size()));

  parallel_for(common.seeds, common.jobs, [&](int r) {
    const std::uint64_t seed = replicate_seed(common, r);
    std::string csv = results_csv_header();
    for (std::size_t c = 0; c < n_valid.size(); ++c) {
      MRConfig cfg;
      cfg.n = options.n;
      cfg.K = options.K;
      cfg.n_valid = n_valid[c];
      cfg.rho = options.rho;
      cfg.param_seed = seed;
      cfg.noise_seed = seed;
      const auto [data, truth] = generate_mr(cfg);
      auto res = run_comparison(data, truth, methods, base, seed);
      csv += results_csv_rows(res, {std::nullopt, options.K - n_valid[c]});
      results[static_cast<std::size_t>(r)][c] = std::move(res);
    }
    write_file_atomic(dir / std::to_string(seed) / "results.csv", csv);
  });

  std::string report = "valid_fraction,method,metric,mean,ci_half_width,n_replicates\n";
  std::string plot = plot_header();
  for (std::size_t c = 0; c < n_valid.size(); ++c) {
    std::vector<MethodResult> pooled;
    for (const auto& rep : results) pooled.insert(pooled.end(), rep[c].begin(), rep[c].end());
    const auto rows = summarize(pooled);
    const std::string frac = format_double(options.valid_fracs[c]);
    report += cell_report(frac + ",", rows);
    for (const auto& row : rows) plot += plot_row(frac, row.metric, row);
  }
  write_file_atomic(dir / "report.csv", report);
  write_file_atomic(dir / "plot_data.csv", plot);
}

void reproduce_v_sensitivity(const ReproduceCommon& common, const VSensitivityOptions& options) {
  check_common(common);
  const ComparisonConfig base = comparison_config(common, demand_estimator_spec());
  std::vector<int> V_range;
  for (int V = 2; V <= options.k; ++V) V_range.push_back(V);
  for (int inv : options.n_invalid) valid_after_invalid(options.k, inv);

  const std::filesystem::path dir = common.outdir / "v-sensitivity";
  std::vector<std::vector<std::vector<MethodResult>>> results(
      static_cast<std::size_t>(common.seeds),
      std::vector<std::vector<MethodResult>>(options.n_invalid.size()));

  parallel_for(common.seeds, common.jobs, [&](int r) {
    const std::uint64_t seed = replicate_seed(common, r);
    std::string csv = results_csv_header();
    for (std::size_t c = 0; c < options.n_invalid.size(); ++c) {
      DemandConfig cfg;
      cfg.n = options.n;
      cfg.k = options.k;
      cfg.valid = valid_after_invalid(options.k, options.n_invalid[c]);
      cfg.gamma = options.gamma;
      cfg.rho = options.rho;
      cfg.param_seed = seed;
      cfg.noise_seed = seed;
      const auto [data, truth] = generate_demand(cfg);
      auto res = sensitivity_sweep(data, truth, V_range, base, seed);
      csv += results_csv_rows(res, {options.gamma, options.n_invalid[c]});
      results[static_cast<std::size_t>(r)][c] = std::move(res);
    }
    write_file_atomic(dir / std::to_string(seed) / "results.csv", csv);
  });

  std::string report = "n_invalid,method,metric,mean,ci_half_width,n_replicates\n";
  std::string plot = plot_header();
  for (std::size_t c = 0; c < options.n_invalid.size(); ++c) {
    std::vector<MethodResult> pooled;
    for (const auto& rep : results) pooled.insert(pooled.end(), rep[c].begin(), rep[c].end());
    const auto rows = summarize(pooled);
    const std::string inv = std::to_string(options.n_invalid[c]);
    report += cell_report(inv + ",", rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].metric != "mse") continue;
      plot += plot_row(std::to_string(V_range[i / 2]), "n_invalid=" + inv, rows[i]);
    }
  }
  write_file_atomic(dir / "report.csv", report);
  write_file_atomic(dir / "plot_data.csv", plot);
}

TheoremRow theorem_row(const std::vector<double>& estimates, double n) {
  TheoremRow row;
  row.n = n;
  row.replicates = static_cast<int>(estimates.size());
  const double m = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= m;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double e : estimates) {
    const double d = e - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= m;
  m3 /= m;
  m4 /= m;
  row.mean = mean;
  row.variance = estimates.size() > 1 ? m2 * m / (m - 1.0) : 0.0;
  row.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  row.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return row;
}

void reproduce_theorem(const ReproduceCommon& common, const TheoremOptions& options) {
  check_common(common);
  if (options.limits.empty()) throw ConfigError("theorem needs limits");
  const double beta = options.limits.front();
  AggregationConfig agg;
  agg.V = options.V;
  const std::filesystem::path dir = common.outdir / "theorem";

  std::vector<std::vector<TheoremRow>> rows(static_cast<std::size_t>(common.seeds));
  parallel_for(common.seeds, common.jobs, [&](int r) {
    const std::uint64_t seed = replicate_seed(common, r);
    std::string csv = "n,replicates,mean_estimate,variance,skewness,excess_kurtosis,beta\n";
    for (double n : options.ns) {
      SyntheticEstimatorSpec spec;
      spec.limits = options.limits;
      spec.sds.assign(options.limits.size(), options.sd);
      spec.n = n;
      spec.seed = seed;
      const TheoremRow row = theorem_row(simulate_theorem(spec, agg, options.replicates), n);
      csv += format_double(n) + "," + std::to_string(row.replicates) + "," +
             format_double(row.mean) + "," + format_double(row.variance) + "," +
             format_double(row.skewness) + "," + format_double(row.excess_kurtosis) + "," +
             format_double(beta) + "\n";
      rows[static_cast<std::size_t>(r)].push_back(row);
    }
    write_file_atomic(dir / std::to_string(seed) / "theorem.csv", csv);
  });

  std::string plot = plot_header();
  for (std::size_t i = 0; i < options.ns.size(); ++i) {
    std::vector<double> means;
    for (const auto& rep : rows) means.push_back(rep[i].mean);
    ReportRow row;
    row.method = "modeiv(" + std::to_string(options.V) + ")";
    row.mean = means.front();
    if (means.size() >= 2) {
      const ConfidenceInterval ci = confidence_interval(means);
      row.mean = ci.mean;
      row.ci_half_width = ci.half_width;
    }
    plot += plot_row(format_double(options.ns[i]), "mean_estimate", row);
  }
  write_file_atomic(dir / "plot_data.csv", plot);
}

}  // namespace modeiv
