#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "homoglab/cell_homogenization.hpp"
#include "homoglab/config.hpp"
#include "homoglab/errors.hpp"
#include "homoglab/experiments.hpp"
#include "homoglab/inclusion_spectrum.hpp"
#include "homoglab/limit_spectrum.hpp"
#include "homoglab/output.hpp"
#include "homoglab/parallel.hpp"
#include "homoglab/unfolding.hpp"

namespace homoglab::cli {

namespace {

struct Globals {
  std::string config;
  std::string out;
  int threads = 0;
  std::string seed;
  bool timings = false;
};

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 16);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("--seed expects a hexadecimal integer, got '" + text + "'");
  }
}

ExperimentConfig load(const Globals& g) {
  auto cfg = g.config.empty() ? parse_config("") : load_config(g.config);
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (!g.seed.empty()) cfg.seed = parse_seed(g.seed);
  if (g.timings) cfg.timings = true;
  cfg.canonical = to_json(cfg);
  if (g.threads > 0) set_thread_count(g.threads);
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double cell_delta(const ExperimentConfig& cfg, int n) { return cfg.contrast.delta_at(1.0 / n); }

int cmd_cell(const ExperimentConfig& cfg, OutputWriter& w, std::optional<double> delta) {
  const double d = delta.value_or(cell_delta(cfg, cfg.ns.back()));
  const auto grid = build_unit_cell_grid(cfg.geometry(), cfg.cell_resolution);
  LinearOptions lin;
  lin.tolerance = cfg.linear_tolerance;
  const auto t = compute_homogenized_tensor(grid, cfg.coefficient_field(), d, lin);
  w.write_json("tensor.json", to_json(t));
  std::cout << "A_hat(delta = " << d << ") =\n" << t.entries << "\n";
  return 0;
}

int cmd_inclusion(const ExperimentConfig& cfg, OutputWriter& w) {
  const auto geom = cfg.geometry();
  const auto grid = build_unit_cell_grid(geom, cfg.cell_resolution);
  const auto spec = compute_inclusion_spectrum(grid, geom, cfg.coefficient_field(), cfg.inclusion_modes);
  w.write_csv("inclusion.csv", "index,mu,inv,mean,branch,c\n" + inclusion_spectrum_csv_rows(spec));
  w.write_json("inclusion.json", {{"theta", spec.theta},
                                  {"modes", spec.size()},
                                  {"discrete_dimension", spec.discrete_dimension},
                                  {"complete", spec.complete()},
                                  {"weight_sum", spec.weight_sum()},
                                  {"tail", spec.tail()},
                                  {"mu", spec.mu}});
  std::cout << spec.size() << " modes, theta = " << spec.theta << ", sum c_i = " << spec.weight_sum() << "\n";
  return 0;
}

std::string beta_plot_csv(const BetaFunction& bf, std::size_t intervals) {
  std::ostringstream os;
  os << std::setprecision(17) << "x,y,series\n";
  const int samples = 200;
  for (std::size_t i = 0; i < intervals; ++i) {
    const double lo = bf.pole(i);
    double hi = i + 1 < bf.pole_count() + 1 ? bf.pole(i + 1) : 2.0 * std::max(lo, 1.0);
    hi = std::min(hi, bf.window_cap);
    for (int s = 1; s < samples; ++s) {
      const double x = lo + (hi - lo) * s / samples;
      try {
        os << x << "," << beta_eval(bf, x).value << ",interval_" << i << "\n";
      } catch (const ValidationError&) {
        // Samples too close to a pole are skipped.
      }
    }
  }
  return os.str();
}

int cmd_limit(const ExperimentConfig& cfg, OutputWriter& w, std::optional<int> n_opt) {
  const int n = n_opt.value_or(cfg.ns.back());
  const double delta = cell_delta(cfg, n);
  const auto lim = limit_at_epsilon(cfg, n, delta, cfg.cell_resolution, cfg.count + 4);
  const auto bf = make_beta_function(lim.inclusion, lim.kappa);
  const auto intervals = admissible_intervals(bf);
  const std::string suffix = "_n" + std::to_string(n);
  w.write_csv("limit" + suffix + ".csv", limit_spectrum_csv(lim.report));
  w.write_csv("beta" + suffix + ".csv", beta_plot_csv(bf, intervals));
  std::vector<double> poles;
  for (std::size_t i = 0; i <= bf.pole_count(); ++i) poles.push_back(bf.pole(i));
  w.write_json("limit" + suffix + ".json", {{"n", n},
                                             {"epsilon", lim.epsilon},
                                             {"delta", lim.delta},
                                             {"kappa", lim.kappa},
                                             {"theta", bf.theta},
                                             {"complete_inclusion_spectrum", bf.complete},
                                             {"poles", poles},
                                             {"intervals", intervals},
                                             {"thetas", lim.thetas},
                                             {"eta_floor", lim.eta_floor},
                                             {"eta", expand_eta(lim.report, static_cast<std::size_t>(cfg.count)).values}});
  const auto eta = expand_eta(lim.report, static_cast<std::size_t>(cfg.count));
  std::cout << "kappa = " << lim.kappa << "; leading eta:";
  for (double v : eta.values) std::cout << " " << v;
  std::cout << "\n";
  return 0;
}

int cmd_fine(const ExperimentConfig& cfg, OutputWriter& w) {
  auto summary = nlohmann::json::array();
  for (int n : cfg.ns) {
    const double delta = cell_delta(cfg, n);
    const auto f = fine_spectrum(cfg, n, delta, cfg.count);
    std::ostringstream os;
    os << std::setprecision(17) << "i,lambda,inverse\n";
    for (std::size_t i = 0; i < f.values.size(); ++i) os << i + 1 << "," << f.values[i] << "," << 1.0 / f.values[i] << "\n";
    w.write_csv("fine_n" + std::to_string(n) + ".csv", os.str());
    nlohmann::json e = {{"n", n},         {"delta", delta},           {"dofs", f.dofs},
                        {"values", f.values}, {"iterations", f.iterations}, {"method", to_string(f.method)}};
    if (cfg.timings) e["seconds"] = f.seconds;
    summary.push_back(e);
    std::cout << "n = " << n << ": lambda_1 = " << f.values.front() << "\n";
  }
  w.write_json("fine.json", {{"runs", summary}});
  return 0;
}

int cmd_unfold(const ExperimentConfig& cfg, OutputWriter& w) {
  const auto rep = estimate_norm_bounds(sine_family(cfg.dim, cfg.unfold_max_frequency), cfg.unfold_ns, cfg.dim,
                                        cfg.unfold_subcells);
  w.write_csv("unfolding_rates.csv", unfolding_rates_csv(rep));
  w.write_json("unfolding_rates.json", to_json(rep));
  std::ostringstream plot;
  plot << std::setprecision(17) << "x,y,series\n";
  for (const auto& r : rep.rows) plot << r.epsilon << "," << r.r_a << ",r_a\n";
  for (const auto& r : rep.rows) plot << r.epsilon << "," << r.r_b << ",r_b\n";
  for (const auto& r : rep.rows) plot << r.epsilon << "," << r.r_c << ",r_c\n";
  w.write_csv("unfolding_plot.csv", plot.str());
  auto show = [](const std::optional<double>& s) { return s ? fmt(*s) : std::string("n/a"); };
  std::cout << "slopes: r_a " << show(rep.slope_a) << ", r_b " << show(rep.slope_b) << ", r_c " << show(rep.slope_c)
            << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, OutputWriter& w) {
  for (int n : cfg.ns) {
    const auto dofs = planned_fine_dofs(cfg, n);
    // Stiffness and mass in CSR plus a sparse factor with modest fill.
    const double mb = static_cast<double>(dofs) * std::pow(3.0, cfg.dim) * 12.0 * 2.0 * 4.0 / 1e6;
    std::cerr << "plan: n = " << n << ", fine dofs = " << dofs << ", est. memory " << std::setprecision(3) << mb
              << " MB\n";
  }
  const auto rep = run_theorem1_sweep(cfg);
  w.write_csv("rates.csv", rates_csv(rep));
  w.write_json("slopes.json", slopes_json(rep, cfg.timings));
  w.write_csv("rates_plot.csv", rates_plot_csv(rep));
  bool failed = false;
  for (const auto& row : rep.rows) {
    if (row.ok) {
      w.write_csv("eta_n" + std::to_string(row.n) + ".csv", limit_spectrum_csv(row.limit));
    } else {
      failed = true;
      std::cerr << "n = " << row.n << " failed: " << row.error << "\n";
    }
  }
  std::cout << "aggregate slope: " << (rep.aggregate_slope ? fmt(*rep.aggregate_slope) : std::string("n/a")) << "\n";
  return failed ? 2 : 0;
}

int cmd_regimes(const ExperimentConfig& cfg, OutputWriter& w) {
  const auto rep = run_regime_study(cfg);
  w.write_csv("regimes.csv", regimes_csv(rep));
  w.write_json("regimes.json", to_json(rep, cfg.timings));
  bool failed = false;
  for (const auto& row : rep.rows) {
    if (!row.ok) {
      failed = true;
      std::cerr << "p = " << row.power << " failed: " << row.error << "\n";
      continue;
    }
    std::cout << "p = " << row.power << " (" << row.regime << "): leading gap " << row.gaps.front();
    if (row.regime == "critical")
      std::cout << ", cluster " << row.cluster_found << "/" << row.cluster_expected << " spread " << row.cluster_spread;
    std::cout << "\n";
  }
  return failed ? 2 : 0;
}

int cmd_oracle(const ExperimentConfig& cfg, OutputWriter& w) {
  const auto rep = run_oracle_check(cfg);
  w.write_json("oracle.json", to_json(rep));
  std::cout << "dimension " << rep.dimension << ", predicted " << rep.predicted << ", max relative mismatch "
            << rep.max_relative_mismatch << ", max Bloch block mean " << rep.max_bloch_block_mean << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"homoglab: spectral homogenization laboratory for high-contrast periodic media"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment file (TOML subset)");
  app.add_option("--out", g.out, "Output directory (overrides [output] directory)");
  app.add_option("--threads", g.threads, "Worker threads (default: HOMOGLAB_THREADS, else 1)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Eigensolver seed, hexadecimal");
  app.add_flag("--timings", g.timings, "Persist runtimes (outputs are then no longer reproducible)");
  app.fallthrough();

  std::optional<double> delta;
  std::optional<int> n;
  auto* cell = app.add_subcommand("cell", "Correctors and the homogenized tensor");
  cell->add_option("--delta", delta, "Contrast (default: the contrast law at the smallest ε)");
  app.add_subcommand("inclusion", "Dirichlet spectrum of the inclusion");
  auto* limit = app.add_subcommand("limit", "β roots and the limit spectrum η");
  limit->add_option("--n", n, "ε = 1/n (default: the last configured n)");
  app.add_subcommand("fine", "Leading eigenvalues of the fine operator");
  app.add_subcommand("unfold-check", "Unfolding operator rates");
  app.add_subcommand("sweep", "Fine vs limit eigenvalue rates over ε");
  app.add_subcommand("regimes", "Regime study for δ = ε^p");
  app.add_subcommand("oracle", "Dense two-scale oracle cross-check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = load(g);
    const auto* sub = app.get_subcommands().front();
    OutputWriter w(cfg.output_dir, make_header(cfg, sub->get_name()));
    const auto& name = sub->get_name();
    if (name == "cell") return cmd_cell(cfg, w, delta);
    if (name == "inclusion") return cmd_inclusion(cfg, w);
    if (name == "limit") return cmd_limit(cfg, w, n);
    if (name == "fine") return cmd_fine(cfg, w);
    if (name == "unfold-check") return cmd_unfold(cfg, w);
    if (name == "sweep") return cmd_sweep(cfg, w);
    if (name == "regimes") return cmd_regimes(cfg, w);
    if (name == "oracle") return cmd_oracle(cfg, w);
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace homoglab::cli
