// Command-line front door: reproducible experiments with CSV/JSON reports.
// Exit codes: 0 success, 1 usage/validation, 2 theorem precondition unmet,
// 3 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sml/sml.hpp"

namespace {

using sml::json;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  if (values.empty()) throw sml::UsageError("empty numeric list: '" + text + "'");
  return values;
}

unsigned resolve_workers(unsigned flag_value) {
  if (const char* env = std::getenv("SML_WORKERS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) return static_cast<unsigned>(parsed);
  }
  return flag_value;
}

struct MeasureOptions {
  std::string kind = "powerlaw";
  double delta = 0.0;
  double a = 1.0;
  double b = 1.0;
  std::string atoms = "-1:0.5,1:0.5";
  std::string density_csv;

  void attach(CLI::App* cmd) {
    cmd->add_option("--measure", kind, "jump measure kind: powerlaw|atoms|tabulated")
        ->check(CLI::IsMember({"powerlaw", "atoms", "tabulated"}));
    cmd->add_option("--delta", delta, "power-law exponent parameter in (-1,1)");
    cmd->add_option("--a", a, "power-law negative-side support bound");
    cmd->add_option("--b", b, "power-law positive-side support bound");
    cmd->add_option("--atoms", atoms, "atom list 'x:w,x:w'");
    cmd->add_option("--density-csv", density_csv, "tabulated density CSV (x,density)");
  }

  sml::LevyMeasure build() const {
    if (kind == "powerlaw") return sml::LevyMeasure::truncated_power_law(delta, a, b);
    if (kind == "tabulated") {
      if (density_csv.empty())
        throw sml::UsageError("tabulated measure requires --density-csv");
      return sml::LevyMeasure::tabulated_from_csv(density_csv);
    }
    std::vector<sml::LevyAtom> list;
    std::stringstream stream(atoms);
    std::string item;
    while (std::getline(stream, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw sml::UsageError("atom entry '" + item + "' is not 'x:w'");
      list.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    }
    return sml::LevyMeasure::atoms(list);
  }

  json describe() const {
    json j;
    j["kind"] = kind;
    if (kind == "powerlaw") {
      j["delta"] = delta;
      j["a"] = a;
      j["b"] = b;
    } else if (kind == "atoms") {
      j["atoms"] = atoms;
    } else {
      j["density_csv"] = density_csv;
    }
    return j;
  }
};

struct GaussianModelOptions {
  std::string model = "fgn";
  double hurst = 0.75;
  double lambda = 1.0;
  double sigma_tilde = 1.0;
  std::string cov_csv;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "covariance model: fgn|fracou|tabulated")
        ->check(CLI::IsMember({"fgn", "fracou", "tabulated"}));
    cmd->add_option("--hurst", hurst, "Hurst index in (0,1)");
    cmd->add_option("--lambda", lambda, "mean-reversion rate");
    cmd->add_option("--sigma-tilde", sigma_tilde, "driving noise scale");
    cmd->add_option("--cov-csv", cov_csv, "tabulated covariance CSV (lag,value)");
  }

  sml::StationaryCovariance build() const {
    if (model == "fgn") return sml::StationaryCovariance::fgn_increment(hurst);
    if (model == "fracou")
      return sml::StationaryCovariance::frac_ou(hurst, lambda, sigma_tilde);
    if (cov_csv.empty())
      throw sml::UsageError("tabulated covariance requires --cov-csv");
    return sml::StationaryCovariance::tabulated_from_csv(cov_csv);
  }

  json describe() const {
    json j;
    j["model"] = model;
    if (model == "fgn") {
      j["hurst"] = hurst;
    } else if (model == "fracou") {
      j["hurst"] = hurst;
      j["lambda"] = lambda;
      j["sigma_tilde"] = sigma_tilde;
    } else {
      j["cov_csv"] = cov_csv;
    }
    return j;
  }
};

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  sml::write_text_file(out_path, content);
}

void emit_manifest(const std::string& csv_path, json params,
                   const std::string& timestamp) {
  if (csv_path.empty()) return;
  if (!timestamp.empty()) params["timestamp"] = timestamp;
  sml::write_text_file(csv_path + ".manifest.json", sml::manifest_string(params));
}

int run_covfit(const GaussianModelOptions& model_opts, double t_max,
               const std::string& out_path) {
  const sml::StationaryCovariance model = model_opts.build();
  const sml::DecayModel decay = sml::fit_condition_star(model, t_max);

  json report;
  report["command"] = "covfit";
  report["parameters"] = model_opts.describe();
  report["parameters"]["tmax"] = t_max;
  report["alpha"] = decay.alpha;
  report["K"] = decay.K;
  report["M"] = decay.M;
  report["integrable"] = decay.integrable;
  report["regime"] = sml::to_string(decay.regime);
  emit(out_path, sml::manifest_string(report));
  return 0;
}

int run_clt_sweep(const GaussianModelOptions& model_opts, const std::string& f_name,
                  const std::string& t_list_text, double dt, std::size_t n,
                  std::uint64_t seed, double t_max, unsigned workers,
                  const std::string& out_path, const std::string& timestamp) {
  const sml::StationaryCovariance model = model_opts.build();
  const sml::SubordinatorFunction f = sml::subordinator_by_name(f_name);
  const std::vector<double> t_list = parse_list(t_list_text);
  const sml::DecayModel decay = sml::fit_condition_star(model, t_max);
  const sml::HermiteExpansion expansion =
      sml::standardized_expansion(f, std::sqrt(model.c0()));
  const std::vector<sml::CltReport> reports =
      sml::clt_sweep(model, f, decay, expansion, t_list, dt, n, seed, workers);

  sml::CsvWriter csv({"T", "sigma_sq_limit", "empirical_variance", "empirical_dW",
                      "predicted_rate", "bound_term_1", "bound_term_2", "n", "seed"});
  for (const auto& r : reports)
    csv.push_row({sml::format_g17(r.T), sml::format_g17(r.sigma_sq_limit),
                  sml::format_g17(r.empirical_variance),
                  sml::format_g17(r.empirical_dw.value),
                  sml::format_g17(r.predicted_rate), sml::format_g17(r.bound_term_1),
                  sml::format_g17(r.bound_term_2), std::to_string(r.n),
                  std::to_string(r.seed)});
  if (out_path.empty()) {
    std::cout << csv.to_string();
  } else {
    csv.write(out_path);
  }

  json params;
  params["command"] = "clt-sweep";
  params["model"] = model_opts.describe();
  params["f"] = f_name;
  params["tlist"] = t_list;
  params["dt"] = dt;
  params["n"] = n;
  params["seed"] = seed;
  params["tmax"] = t_max;
  emit_manifest(out_path, params, timestamp);
  return 0;
}

int run_smalljump(const MeasureOptions& measure_opts, double t,
                  const std::string& eps_text, std::size_t n, std::uint64_t seed,
                  unsigned floor_divisor, unsigned workers,
                  const std::string& out_path, const std::string& timestamp) {
  const sml::LevyMeasure measure = measure_opts.build();
  const std::vector<double> eps_list = parse_list(eps_text);
  auto h = [](double, double) { return 1.0; };
  const auto points =
      sml::small_jump_clt_experiment(measure, h, t, eps_list, n, seed, floor_divisor,
                                     workers);

  sml::CsvWriter csv({"epsilon", "dW", "se", "n"});
  for (const auto& p : points)
    csv.push_row({sml::format_g17(p.epsilon), sml::format_g17(p.dw.value),
                  sml::format_g17(p.dw.standard_error), std::to_string(p.dw.n)});
  if (out_path.empty()) {
    std::cout << csv.to_string();
  } else {
    csv.write(out_path);
  }

  json params;
  params["command"] = "smalljump";
  params["measure"] = measure_opts.describe();
  params["t"] = t;
  params["epsilons"] = eps_list;
  params["n"] = n;
  params["seed"] = seed;
  params["floor_divisor"] = floor_divisor;
  emit_manifest(out_path, params, timestamp);
  return 0;
}

int run_flp(const MeasureOptions& measure_opts, double hurst, double epsilon,
            double t_max, std::size_t n_points, std::size_t n, std::uint64_t seed,
            const std::string& format, unsigned workers, const std::string& out_path,
            const std::string& timestamp) {
  if (out_path.empty()) throw sml::UsageError("flp requires --out");
  const sml::LevyMeasure measure = measure_opts.build();
  const sml::Grid grid(0.0, t_max, n_points);
  const sml::FlpEnsemble ensemble =
      sml::simulate_flp_approx(hurst, measure, epsilon, grid, n, seed, false, workers);
  if (format == "csv") {
    sml::write_flp_csv(ensemble, out_path);
  } else {
    sml::write_flp_binary(ensemble, out_path);
  }

  json check;
  check["command"] = "flp";
  check["measure"] = measure_opts.describe();
  check["hurst"] = hurst;
  check["epsilon"] = epsilon;
  check["tmax"] = t_max;
  check["n_points"] = n_points;
  check["n"] = n;
  check["seed"] = seed;
  check["format"] = format;
  check["kernel_covariance_error"] = sml::kernel_covariance_error(hurst, grid);
  check["small_jump_ratio"] = ensemble.small_jump_ratio;
  if (const auto diag = sml::sigma_over_eps_diagnostic(measure, epsilon))
    check["sigma_over_eps"] = *diag;
  if (!timestamp.empty()) check["timestamp"] = timestamp;
  sml::write_text_file(out_path + ".kernel.json", sml::manifest_string(check));
  return 0;
}

int run_ou_product(const MeasureOptions& measure_opts, double lambda,
                   const std::string& t_list_text, double dt, std::size_t n,
                   std::uint64_t seed, unsigned workers, const std::string& out_path,
                   const std::string& timestamp) {
  const sml::LevyMeasure measure = measure_opts.build();
  const std::vector<double> t_list = parse_list(t_list_text);
  const sml::RateExperiment experiment =
      sml::rate_experiment(lambda, measure, t_list, dt, n, seed, workers);

  sml::CsvWriter csv({"T", "dW", "se", "var_analytic", "var_empirical", "term_dF4",
                      "term_cube", "term_contraction", "term_d2sq"});
  for (const auto& p : experiment.points)
    csv.push_row({sml::format_g17(p.t_horizon), sml::format_g17(p.dw.value),
                  sml::format_g17(p.dw.standard_error),
                  sml::format_g17(p.var_analytic), sml::format_g17(p.var_empirical),
                  sml::format_g17(p.bounds.term_dF4), sml::format_g17(p.bounds.term_cube),
                  sml::format_g17(p.bounds.term_contraction),
                  sml::format_g17(p.bounds.term_d2sq)});
  if (out_path.empty()) {
    std::cout << csv.to_string();
  } else {
    csv.write(out_path);
  }

  json bounds;
  bounds["command"] = "ou-product";
  bounds["measure"] = measure_opts.describe();
  bounds["lambda"] = lambda;
  bounds["tlist"] = t_list;
  bounds["dt"] = dt;
  bounds["n"] = n;
  bounds["seed"] = seed;
  bounds["fitted_rate_slope"] = experiment.fit.slope;
  bounds["fitted_rate_r_squared"] = experiment.fit.r_squared;
  bounds["predicted_rate_exponent"] = -0.25;
  bounds["conjectured_rate_exponent"] = experiment.conjectured_rate_exponent;
  if (!out_path.empty()) {
    if (!timestamp.empty()) bounds["timestamp"] = timestamp;
    sml::write_text_file(out_path + ".bounds.json", sml::manifest_string(bounds));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stein-Malliavin limit-theorem simulation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value configuration file");

  std::uint64_t seed = 20240801;
  std::size_t n = 10000;
  unsigned workers = 1;
  std::string out_path;
  std::string timestamp;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--n", n, "replicate count")->capture_default_str();
  app.add_option("--workers", workers,
                 "worker threads (env SML_WORKERS overrides)")
      ->capture_default_str();
  app.add_option("--out", out_path, "output path (stdout when omitted)");
  app.add_option("--timestamp", timestamp,
                 "optional manifest timestamp (omitted when empty)");

  GaussianModelOptions covfit_model;
  GaussianModelOptions clt_model;
  MeasureOptions sj_measure;
  MeasureOptions flp_measure;
  MeasureOptions ou_measure;
  ou_measure.kind = "atoms";

  auto* covfit = app.add_subcommand("covfit", "fit the covariance-decay hypothesis");
  covfit->fallthrough();
  double covfit_tmax = 10000.0;
  covfit_model.attach(covfit);
  covfit->add_option("--tmax", covfit_tmax, "largest tail lag")->capture_default_str();

  auto* clt = app.add_subcommand("clt-sweep",
                                 "simulate the subordinated functional over horizons");
  clt->fallthrough();
  std::string f_name = "x";
  std::string clt_tlist = "64,128,256,512";
  double clt_dt = 0.25;
  double clt_tmax = 10000.0;
  clt_model.attach(clt);
  clt->add_option("--f", f_name, "subordinator: x|x2|x3")->capture_default_str();
  clt->add_option("--tlist", clt_tlist, "comma-separated horizons")->capture_default_str();
  clt->add_option("--dt", clt_dt, "time step")->capture_default_str();
  clt->add_option("--tmax", clt_tmax, "tail horizon for the decay fit")
      ->capture_default_str();

  auto* smalljump = app.add_subcommand("smalljump",
                                       "small-jump normality experiment over epsilons");
  smalljump->fallthrough();
  double sj_t = 1.0;
  std::string sj_eps = "0.2,0.1,0.05";
  unsigned sj_floor = 64;
  sj_measure.attach(smalljump);
  smalljump->add_option("--t", sj_t, "time horizon of the functional")
      ->capture_default_str();
  smalljump->add_option("--epsilons", sj_eps, "comma-separated truncation levels")
      ->capture_default_str();
  smalljump->add_option("--floor-divisor", sj_floor,
                        "epsilon/floor ratio for layered sampling")
      ->capture_default_str();

  auto* flp = app.add_subcommand("flp", "fractional Levy path ensemble");
  flp->fallthrough();
  double flp_hurst = 0.75;
  double flp_eps = 0.1;
  double flp_tmax = 2.0;
  std::size_t flp_points = 129;
  std::string flp_format = "csv";
  flp_measure.attach(flp);
  flp->add_option("--hurst", flp_hurst, "Hurst index")->capture_default_str();
  flp->add_option("--epsilon", flp_eps, "jump truncation level")->capture_default_str();
  flp->add_option("--tmax", flp_tmax, "horizon")->capture_default_str();
  flp->add_option("--n-points", flp_points, "grid points")->capture_default_str();
  flp->add_option("--format", flp_format, "csv|bin")
      ->check(CLI::IsMember({"csv", "bin"}))
      ->capture_default_str();

  auto* ou = app.add_subcommand("ou-product",
                                "OU-product rate experiment over horizons");
  ou->fallthrough();
  double ou_lambda = 1.0;
  std::string ou_tlist = "32,64,128,256,512,1024";
  double ou_dt = 0.25;
  ou_measure.attach(ou);
  ou->add_option("--lambda", ou_lambda, "mean-reversion rate")->capture_default_str();
  ou->add_option("--tlist", ou_tlist, "comma-separated horizons")->capture_default_str();
  ou->add_option("--dt", ou_dt, "time step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const unsigned effective_workers = resolve_workers(workers);
    if (covfit->parsed()) return run_covfit(covfit_model, covfit_tmax, out_path);
    if (clt->parsed())
      return run_clt_sweep(clt_model, f_name, clt_tlist, clt_dt, n, seed, clt_tmax,
                           effective_workers, out_path, timestamp);
    if (smalljump->parsed())
      return run_smalljump(sj_measure, sj_t, sj_eps, n, seed, sj_floor,
                           effective_workers, out_path, timestamp);
    if (flp->parsed())
      return run_flp(flp_measure, flp_hurst, flp_eps, flp_tmax, flp_points, n, seed,
                     flp_format, effective_workers, out_path, timestamp);
    if (ou->parsed())
      return run_ou_product(ou_measure, ou_lambda, ou_tlist, ou_dt, n, seed,
                            effective_workers, out_path, timestamp);
    throw sml::UsageError("no subcommand given");
  } catch (const sml::TheoremError& e) {
    std::cerr << "theorem precondition unmet: " << e.what() << "\n";
    return 2;
  } catch (const sml::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const sml::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
