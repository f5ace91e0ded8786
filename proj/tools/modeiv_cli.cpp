// modeiv command-line front end.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "modeiv/csv_writer.hpp"
#include "modeiv/dataset.hpp"
#include "modeiv/error.hpp"
#include "modeiv/estimators.hpp"
#include "modeiv/evaluation.hpp"
#include "modeiv/experiments.hpp"
#include "modeiv/serialize.hpp"
#include "modeiv/simulators.hpp"

namespace fs = std::filesystem;
using namespace modeiv;

namespace {

struct Global {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string outdir = "results";
};

struct EstimatorFlags {
  std::string preset = "none";
  std::string kind = "cond_linear";
  int degree = 1;
  int bumps = 0;
  double bump_width = 0.5;
  int expand_column = 0;  // 1-based; 0 means none
  bool no_interact = false;
  std::optional<double> ridge;
  std::optional<double> ridge_per_row;
  std::optional<double> weak_threshold;
  std::optional<std::string> second_stage;

  /// reproduce adds "auto": the preset matching the experiment.
  void add(CLI::App* app, bool with_auto = false) {
    if (with_auto) {
      preset = "auto";
      app->add_option("--preset", preset,
                      "Estimator preset: auto (match the experiment), demand, mr or none (use the flags below)")
          ->check(CLI::IsMember({"auto", "demand", "mr", "none"}));
    } else {
      app->add_option("--preset", preset, "Estimator preset: demand, mr or none (use the flags below)")
          ->check(CLI::IsMember({"demand", "mr", "none"}));
    }
    app->add_option("--estimator", kind, "Estimator kind: linear_tsls, cond_linear or sieve")
        ->check(CLI::IsMember({"linear", "linear_tsls", "cond_linear", "sieve"}));
    app->add_option("--degree", degree, "Polynomial degree of the basis");
    app->add_option("--bumps", bumps, "Number of radial bumps in the basis");
    app->add_option("--bump-width", bump_width, "Bump width as a fraction of centre spacing");
    app->add_option("--expand-column", expand_column,
                    "Covariate column (1-based) expanded by the basis; 0 for none");
    app->add_flag("--no-interact", no_interact, "Do not cross the basis with other covariates");
    app->add_option("--ridge", ridge, "Absolute ridge penalty (default: 0 for linear, per-row weight * n otherwise)");
    app->add_option("--ridge-per-row", ridge_per_row,
                    "Ridge weight per training row (default: from preset, else 1e-6)");
    app->add_option("--weak-threshold", weak_threshold,
                    "Minimum first-stage F statistic (default: from preset, else 10)");
    app->add_option("--second-stage", second_stage,
                    "cond_linear second stage: plug_in, projected or instrumented (default: from preset, else plug_in)")
        ->check(CLI::IsMember({"plug_in", "projected", "instrumented"}));
  }

  /// `fallback` resolves the auto preset.
  EstimatorSpec spec(const std::string& fallback = "none") const {
    const std::string& chosen = preset == "auto" ? fallback : preset;
    EstimatorSpec s;
    if (chosen == "demand") {
      s = demand_estimator_spec();
    } else if (chosen == "mr") {
      s = mr_estimator_spec();
    } else {
      s.kind = parse_estimator_kind(kind);
      s.basis.degree = degree;
      s.basis.bumps = bumps;
      s.basis.bump_width = bump_width;
      if (expand_column > 0) s.basis.expand_column = expand_column - 1;
      s.basis.interact = !no_interact;
    }
    if (ridge) s.ridge_lambda = ridge;
    if (ridge_per_row) s.ridge_per_row = *ridge_per_row;
    if (weak_threshold) s.weak_instrument_threshold = *weak_threshold;
    if (second_stage) s.second_stage = parse_second_stage(*second_stage);
    return s;
  }
};

struct SplitFlags {
  double train = 0.9;
  double validation = 0.1;

  void add(CLI::App* app) {
    app->add_option("--train-fraction", train, "Training share of the rows");
    app->add_option("--validation-fraction", validation, "Validation share of the rows");
  }
  SplitSpec spec(std::uint64_t seed) const { return SplitSpec{train, validation, seed}; }
};

struct GridFlags {
  Index points = 1000;
  Index x_sample = 200;
  double p_lo = 2.5;
  double p_hi = 97.5;
  std::string target = "structural";

  void add(CLI::App* app) {
    app->add_option("--grid-points", points, "Treatment grid size");
    app->add_option("--x-sample", x_sample, "Held-out covariate rows crossed with the grid");
    app->add_option("--p-lo", p_lo, "Lower grid percentile of the training treatment");
    app->add_option("--p-hi", p_hi, "Upper grid percentile of the training treatment");
    app->add_option("--target", target, "Truth target: structural or response")
        ->check(CLI::IsMember({"structural", "response"}));
  }
  GridSpec spec() const {
    GridSpec g;
    g.n_points = points;
    g.x_sample = x_sample;
    g.p_lo = p_lo;
    g.p_hi = p_hi;
    return g;
  }
  TruthTarget truth_target() const {
    return target == "response" ? TruthTarget::response : TruthTarget::structural;
  }
};

std::vector<int> to_zero_based(const std::vector<int>& one_based, const std::string& flag) {
  std::vector<int> out;
  for (int v : one_based) {
    if (v < 1) throw ConfigError(flag + ": indices are 1-based");
    out.push_back(v - 1);
  }
  return out;
}

/// "2..8" or "2,3,5".
std::vector<int> parse_range(const std::string& text, const std::string& flag) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return parse_int_list(text, flag);
  const int lo = static_cast<int>(parse_int(text.substr(0, dots), flag));
  const int hi = static_cast<int>(parse_int(text.substr(dots + 2), flag));
  if (hi < lo) throw ConfigError(flag + ": empty range " + text);
  std::vector<int> out;
  for (int v = lo; v <= hi; ++v) out.push_back(v);
  return out;
}

void write_simulation(const fs::path& dir, const Dataset& data, const TruthOracle& truth,
                      const std::string& config_text) {
  save_csv(data, dir / "data.csv");
  write_file_atomic(dir / "truth.json", truth_to_json(truth));
  write_file_atomic(dir / "config.txt", config_text);
  std::cout << "wrote " << (dir / "data.csv").string() << " (" << data.n() << " rows, d = "
            << data.d() << ", k = " << data.k() << ")\n";
}

std::string diagnostics_csv(const EnsembleFit& fit) {
  std::ostringstream os;
  os << "instrument,status,first_stage_f,first_stage_partial_r2,instrument_strength,"
        "first_stage_residual_variance,second_stage_residual_variance,n_train,ridge_lambda,message\n";
  for (const auto& e : fit.estimators) {
    const auto& d = e.diagnostics();
    os << e.instrument() + 1 << ",ok," << format_double(d.first_stage_f) << ','
       << format_double(d.first_stage_partial_r2) << ',' << format_double(d.instrument_strength)
       << ',' << format_double(d.first_stage_residual_variance) << ','
       << format_double(d.second_stage_residual_variance) << ',' << d.n_train << ','
       << format_double(d.ridge_lambda) << ",\n";
  }
  for (const auto& f : fit.failures) {
    std::string msg = f.message;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    os << f.instrument + 1 << ",failed,,,,,,,," << msg << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust instrumental-variable estimation with modal aggregation of per-instrument fits"};
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Optional INI/TOML file with option values; command-line flags override it");

  Global g;
  app.add_option("--seed", g.seed, "Base random seed");
  app.add_option("--jobs", g.jobs, "Parallel replicate workers")->check(CLI::PositiveNumber);
  app.add_option("--outdir", g.outdir, "Output root directory");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset and its truth file");
  simulate->require_subcommand(1);
  simulate->fallthrough();

  DemandConfig demand;
  int demand_invalid = 0;
  std::vector<int> demand_valid;
  std::optional<std::uint64_t> param_seed, noise_seed;
  auto* sim_demand = simulate->add_subcommand("demand", "Demand simulation with exclusion bias");
  sim_demand->add_option("--n", demand.n, "Rows");
  sim_demand->add_option("--k", demand.k, "Candidate instruments");
  sim_demand->add_option("--n-invalid", demand_invalid,
                         "Invalid instruments (the first ones); ignored when --valid is set");
  sim_demand->add_option("--valid", demand_valid, "Explicit 1-based valid instruments")->delimiter(',');
  sim_demand->add_option("--gamma", demand.gamma, "Exclusion-bias scale");
  sim_demand->add_option("--rho", demand.rho, "Confounding strength");
  sim_demand->add_option("--param-seed", param_seed, "Parameter seed (default: --seed)");
  sim_demand->add_option("--noise-seed", noise_seed, "Noise seed (default: --seed)");
  sim_demand->add_flag("--zero-noise", demand.zero_noise, "Force price and outcome noise to zero");

  MRConfig mr;
  auto* sim_mr = simulate->add_subcommand("mr", "Mendelian randomization simulation");
  sim_mr->add_option("--n", mr.n, "Rows");
  sim_mr->add_option("--k", mr.K, "Candidate instruments K");
  sim_mr->add_option("--n-valid", mr.n_valid, "Valid instruments");
  sim_mr->add_option("--rho", mr.rho, "Confounder weight in the treatment");
  sim_mr->add_option("--u-variance", mr.u_variance, "Variance of the shared confounder");
  sim_mr->add_option("--pilot-size", mr.pilot_size, "Pilot sample size for scale factors");
  sim_mr->add_option("--param-seed", param_seed, "Parameter seed (default: --seed)");
  sim_mr->add_option("--noise-seed", noise_seed, "Noise seed (default: --seed)");
  sim_mr->add_flag("--zero-noise", mr.zero_noise, "Force u, eps_x and eps_y to zero");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit one estimator per instrument on the training split");
  std::string fit_data;
  EstimatorFlags fit_est;
  SplitFlags fit_split;
  std::string fit_conditioning = "independent";
  bool fit_skip = false;
  std::vector<int> fit_instruments;
  fit->add_option("--data", fit_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  fit_est.add(fit);
  fit_split.add(fit);
  fit->add_option("--conditioning", fit_conditioning, "independent or leave_one_out")
      ->check(CLI::IsMember({"independent", "leave_one_out"}));
  fit->add_flag("--skip-failed", fit_skip, "Record failed instruments instead of stopping");
  fit->add_option("--instruments", fit_instruments, "1-based instruments to fit (default: all)")
      ->delimiter(',');

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score methods against the truth on a grid");
  std::string ev_data, ev_truth, ev_ensemble, ev_methods = "modeiv,mean,naive,oracle", ev_sweep;
  EstimatorFlags ev_est;
  SplitFlags ev_split;
  GridFlags ev_grid;
  std::string ev_conditioning = "independent";
  bool ev_skip = false;
  bool ev_modal_dump = false;
  evaluate->add_option("--data", ev_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--truth", ev_truth, "Truth JSON from simulate")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ensemble", ev_ensemble, "Directory written by fit (default: fit afresh)");
  evaluate->add_option("--methods", ev_methods,
                       "Comma-separated methods: modeiv[(V)], mean, naive, oracle, single(j)");
  evaluate->add_option("--v-sweep", ev_sweep, "Add one modeiv row per V, e.g. 2..8");
  ev_est.add(evaluate);
  ev_split.add(evaluate);
  ev_grid.add(evaluate);
  evaluate->add_option("--conditioning", ev_conditioning, "independent or leave_one_out")
      ->check(CLI::IsMember({"independent", "leave_one_out"}));
  evaluate->add_flag("--skip-failed", ev_skip, "Drop instruments whose fit fails");
  evaluate->add_flag("--modal-dump", ev_modal_dump,
                     "Also write modal.csv with the interval and members at each grid point");

  // reproduce
  auto* reproduce = app.add_subcommand("reproduce", "Run an experiment sweep across seeds");
  std::string experiment;
  ReproduceCommon common;
  EstimatorFlags rp_est;
  GridFlags rp_grid;
  SplitFlags rp_split;
  DemandBiasOptions db;
  MRTableOptions mt;
  VSensitivityOptions vs;
  TheoremOptions th;
  std::optional<Index> rp_n;
  std::optional<int> rp_k;
  std::optional<int> rp_v;
  std::vector<double> rp_gammas = db.gammas, rp_fracs = mt.valid_fracs, rp_ns = th.ns;
  std::vector<int> rp_invalid = db.n_invalid;
  std::optional<double> rp_gamma;
  bool rp_skip = false;
  reproduce->add_option("experiment", experiment, "demand-bias, mr-table, v-sensitivity or theorem")
      ->required()
      ->check(CLI::IsMember({"demand-bias", "mr-table", "v-sensitivity", "theorem"}));
  reproduce->add_option("--seeds", common.seeds, "Replicates (seeds --seed .. --seed + seeds - 1)");
  reproduce->add_option("--n", rp_n, "Rows per dataset (default: 10000 demand, 50000 mr)");
  reproduce->add_option("--k", rp_k, "Instruments (default: 8 demand, 20 mr)");
  reproduce->add_option("--v", rp_v, "modeiv V (default: ceil(k / 2); theorem: 5)");
  reproduce->add_option("--gammas", rp_gammas, "demand-bias: bias scales")->delimiter(',');
  reproduce->add_option("--gamma", rp_gamma, "v-sensitivity: bias scale (default 1)");
  reproduce->add_option("--n-invalid", rp_invalid, "demand-bias / v-sensitivity: invalid counts")
      ->delimiter(',');
  reproduce->add_option("--valid-fracs", rp_fracs, "mr-table: valid fractions")->delimiter(',');
  reproduce->add_option("--ns", rp_ns, "theorem: effective sample sizes")->delimiter(',');
  reproduce->add_option("--replicates", th.replicates, "theorem: Monte Carlo replicates per n");
  reproduce->add_flag("--skip-failed", rp_skip, "Drop instruments whose fit fails");
  rp_est.add(reproduce, true);
  rp_grid.add(reproduce);
  rp_split.add(reproduce);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const fs::path outdir = g.outdir;
    const std::string seed_dir = std::to_string(g.seed);

    if (*sim_demand) {
      if (!demand_valid.empty()) {
        demand.valid = to_zero_based(demand_valid, "--valid");
      } else {
        demand.valid = valid_after_invalid(demand.k, demand_invalid);
      }
      demand.param_seed = param_seed.value_or(g.seed);
      demand.noise_seed = noise_seed.value_or(g.seed);
      demand.validate();
      const auto [data, truth] = generate_demand(demand);
      write_simulation(outdir / "demand" / seed_dir, data, truth, to_text(demand));
    } else if (*sim_mr) {
      mr.param_seed = param_seed.value_or(g.seed);
      mr.noise_seed = noise_seed.value_or(g.seed);
      mr.validate();
      const auto [data, truth] = generate_mr(mr);
      write_simulation(outdir / "mr" / seed_dir, data, truth, to_text(mr));
    } else if (*fit) {
      const Dataset data = load_csv(fit_data);
      const DatasetSplit parts = split(data, fit_split.spec(g.seed));
      EnsembleFitConfig cfg;
      cfg.spec = fit_est.spec();
      cfg.instruments = to_zero_based(fit_instruments, "--instruments");
      cfg.conditioning = parse_conditioning(fit_conditioning);
      cfg.skip_failed = fit_skip;
      const EnsembleFit result = fit_ensemble(parts.train, cfg);
      const fs::path dir = outdir / "fit" / seed_dir;
      save_ensemble(result.estimators, dir / "ensemble");
      write_file_atomic(dir / "diagnostics.csv", diagnostics_csv(result));
      for (const auto& f : result.failures) {
        std::cerr << "skipped z_" << f.instrument + 1 << ": " << f.message << '\n';
      }
      std::cout << "fitted " << result.estimators.size() << " estimators into "
                << (dir / "ensemble").string() << '\n';
    } else if (*evaluate) {
      const Dataset data = load_csv(ev_data);
      const TruthOracle truth = truth_from_json(read_file(ev_truth));
      ComparisonConfig cfg;
      cfg.spec = ev_est.spec();
      cfg.conditioning = parse_conditioning(ev_conditioning);
      cfg.skip_failed = ev_skip;
      cfg.split = ev_split.spec(g.seed);
      cfg.grid = ev_grid.spec();
      cfg.target = ev_grid.truth_target();
      std::vector<Method> methods = parse_methods(ev_methods);
      if (!ev_sweep.empty()) {
        for (int V : parse_range(ev_sweep, "--v-sweep")) methods.push_back(Method{Method::Kind::modeiv, V, -1});
      }
      std::optional<std::vector<FittedEstimator>> saved;
      if (!ev_ensemble.empty()) {
        saved = load_ensemble(ev_ensemble);
        if (saved->empty()) throw ConfigError("ensemble directory holds no estimators");
        cfg.spec = saved->front().spec();
      }
      Comparison cmp(data, truth, cfg, g.seed);
      if (saved) cmp.set_ensemble(std::move(*saved));
      const auto results = cmp.evaluate(methods);
      const fs::path dir = outdir / "evaluate" / seed_dir;
      write_file_atomic(dir / "results.csv", results_csv_header() + results_csv_rows(results, {}));
      write_file_atomic(dir / "report.csv", report_csv(summarize(results)));
      if (ev_modal_dump) {
        // Interval of the first modeiv method, or default_v without one.
        int V = 0;
        for (const auto& r : results) {
          if (r.method.kind == Method::Kind::modeiv) {
            V = r.V;
            break;
          }
        }
        const auto& members = cmp.ensemble().estimators;
        if (V == 0) V = default_v(static_cast<Index>(members.size()));
        const EnsemblePredictor predictor(members, AggregationConfig{V});
        const auto points = cmp.grid().points();
        write_file_atomic(dir / "modal.csv",
                          modal_diagnostics_csv(points, predict_curve(predictor, points)));
      }
      for (const auto& r : results) {
        Method m = r.method;
        if (m.kind == Method::Kind::modeiv) m.V = r.V;
        std::cout << m.label() << ": mse = " << format_double(r.mse)
                  << ", cate_abs_bias = " << format_double(r.cate_abs_bias) << '\n';
      }
    } else if (*reproduce) {
      common.seed = g.seed;
      common.jobs = g.jobs;
      common.outdir = outdir;
      common.grid = rp_grid.spec();
      common.split = rp_split.spec(g.seed);
      common.skip_failed = rp_skip;
      common.spec = rp_est.spec(experiment == "mr-table" ? "mr" : "demand");
      if (experiment == "demand-bias") {
        if (rp_n) db.n = *rp_n;
        if (rp_k) db.k = *rp_k;
        if (rp_v) db.V = *rp_v;
        db.gammas = rp_gammas;
        db.n_invalid = rp_invalid;
        reproduce_demand_bias(common, db);
      } else if (experiment == "mr-table") {
        if (rp_n) mt.n = *rp_n;
        if (rp_k) mt.K = *rp_k;
        if (rp_v) mt.V = *rp_v;
        mt.valid_fracs = rp_fracs;
        reproduce_mr_table(common, mt);
      } else if (experiment == "v-sensitivity") {
        if (rp_n) vs.n = *rp_n;
        if (rp_k) vs.k = *rp_k;
        if (rp_gamma) vs.gamma = *rp_gamma;
        vs.n_invalid = rp_invalid;
        reproduce_v_sensitivity(common, vs);
      } else {
        if (rp_v) th.V = *rp_v;
        th.ns = rp_ns;
        reproduce_theorem(common, th);
      }
      std::cout << "wrote " << (outdir / experiment).string() << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
