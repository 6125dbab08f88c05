#include "homoglab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "homoglab/errors.hpp"
#include "homoglab/fem.hpp"
#include "homoglab/unfolding.hpp"

namespace homoglab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

EigenResult solve_smallest(const SparseSymmetricOperator& op, const ExperimentConfig& cfg, int count,
                           std::optional<double> shift = std::nullopt) {
  auto req = make_request(op, count, cfg.eigen_tolerance);
  req.method = cfg.method;
  req.seed = cfg.seed;
  req.shift = shift;
  // Large shifted windows converge in a few sweeps once the block clears
  // the cluster by a margin.
  if (shift && count > 32) req.block_size = count + 64;
  auto res = smallest_eigenpairs(req);
  res.require_converged();
  return res;
}

std::vector<double> homogenized_thetas(const EpsilonDomain& dom, const Eigen::MatrixXd& a_hat,
                                       const ExperimentConfig& cfg, int count) {
  const auto op = assemble_homogenized_operator(dom.grid, a_hat);
  count = std::min<int>(count, static_cast<int>(op.dimension));
  return solve_smallest(op, cfg, count).values;
}

std::string regime_name(double p) {
  if (p < 2.0) return "homogenized";
  if (p > 2.0) return "perforated";
  return "critical";
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

std::size_t planned_fine_dofs(const ExperimentConfig& cfg, int n) {
  std::size_t nodes = 1;
  for (int k = 0; k < cfg.dim; ++k) nodes *= static_cast<std::size_t>(n * cfg.subcells - 1);
  return nodes * static_cast<std::size_t>(cfg.components);
}

FineSpectrum fine_spectrum(const ExperimentConfig& cfg, int n, double delta, int count, std::optional<double> shift) {
  const auto t0 = Clock::now();
  const auto dom = build_epsilon_domain(cfg.geometry(), n, cfg.subcells);
  const auto op = assemble_fine_operator(dom, cfg.coefficient_field(), ContrastWeight(delta, 1.0 / n));
  FineSpectrum out;
  out.n = n;
  out.delta = delta;
  out.dofs = op.dimension;
  const auto res = solve_smallest(op, cfg, std::min<int>(count, static_cast<int>(op.dimension)), shift);
  out.values = res.values;
  out.inverse = res.inverse_values();
  out.iterations = res.iterations;
  out.method = res.method;
  out.seconds = seconds_since(t0);
  return out;
}

LimitAtEpsilon limit_at_epsilon(const ExperimentConfig& cfg, int n, double delta, int y_resolution, int theta_count) {
  const auto geom = cfg.geometry();
  const auto A = cfg.coefficient_field();
  LimitAtEpsilon out;
  out.n = n;
  out.epsilon = 1.0 / n;
  out.delta = delta;
  out.kappa = out.epsilon * out.epsilon / delta;

  const auto grid_y = build_unit_cell_grid(geom, y_resolution);
  LinearOptions lin;
  lin.tolerance = cfg.linear_tolerance;
  out.tensor = compute_homogenized_tensor(grid_y, A, delta, lin);
  out.inclusion = compute_inclusion_spectrum(grid_y, geom, A, cfg.inclusion_modes);

  const auto dom = build_epsilon_domain(geom, n, cfg.subcells);
  out.thetas = homogenized_thetas(dom, out.tensor.entries, cfg, theta_count);

  const auto bf = make_beta_function(out.inclusion, out.kappa);
  const auto intervals = admissible_intervals(bf);
  const auto roots = residual_roots(bf, out.thetas, intervals, out.epsilon);
  const auto bloch = bloch_spectrum(out.inclusion, dom.lattice, out.kappa);
  out.report = limit_eta(bloch, roots);

  // A root (i, j) with j beyond the θ window lies below root (i, last j).
  const std::size_t theta_dofs = assemble_homogenized_operator(dom.grid, out.tensor.entries).dimension;
  if (out.thetas.size() < theta_dofs) {
    for (const auto& r : out.report.residual)
      if (r.j + 1 == out.thetas.size()) out.eta_floor = std::max(out.eta_floor, 1.0 / r.lambda);
  }
  if (!out.inclusion.complete()) {
    out.eta_floor = std::max(out.eta_floor, out.kappa / out.inclusion.mu.back());
    out.eta_floor = std::max(out.eta_floor, 1.0 / bf.pole(intervals));
  }
  return out;
}

ExpandedEta expand_eta(const LimitSpectrumReport& report, std::size_t limit) {
  ExpandedEta out;
  for (const auto& e : report.eta) {
    for (std::size_t m = 0; m < e.multiplicity && out.values.size() < limit; ++m) {
      out.values.push_back(e.value);
      out.branches.push_back(e.branch);
    }
    if (out.values.size() >= limit) break;
  }
  return out;
}

RateReport run_theorem1_sweep(const ExperimentConfig& cfg) {
  RateReport rep;
  rep.count = cfg.count;
  const auto k = static_cast<std::size_t>(cfg.count);
  // ε values run one after another; each solve uses the worker pool.
  for (int n : cfg.ns) {
    RateRow row;
    row.n = n;
    row.epsilon = 1.0 / n;
    row.delta = cfg.contrast.delta_at(row.epsilon);
    row.kappa = row.epsilon * row.epsilon / row.delta;
    const auto t0 = Clock::now();
    try {
      const auto fine = fine_spectrum(cfg, n, row.delta, cfg.count);
      row.fine_dofs = fine.dofs;
      row.fine_iterations = fine.iterations;
      row.fine = fine.inverse;
      const auto lim = limit_at_epsilon(cfg, n, row.delta, cfg.subcells, cfg.count + 4);
      const auto eta = expand_eta(lim.report, k);
      row.eta = eta.values;
      row.limit = lim.report;
      row.branches = eta.branches;
      const std::size_t pairs = std::min({k, row.eta.size(), row.fine.size()});
      for (std::size_t i = 0; i < pairs; ++i) row.errors.push_back(std::abs(row.fine[i] - row.eta[i]));
      if (pairs > 0 && row.eta[pairs - 1] < lim.eta_floor) {
        std::ostringstream msg;
        msg << "η enumeration is only complete above " << lim.eta_floor << " but entry " << pairs << " is "
            << row.eta[pairs - 1];
        throw NumericalError(msg.str());
      }
      if (pairs < k) {
        std::ostringstream msg;
        msg << "only " << pairs << " of " << k << " eigenvalues could be paired";
        throw NumericalError(msg.str());
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = seconds_since(t0);
    rep.rows.push_back(std::move(row));
  }

  rep.slopes.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> x, y;
    for (const auto& r : rep.rows)
      if (r.ok && i < r.errors.size()) {
        x.push_back(r.epsilon);
        y.push_back(r.errors[i]);
      }
    rep.slopes[i] = fit_loglog_slope(x, y);
  }
  std::vector<double> x, y;
  for (const auto& r : rep.rows)
    if (r.ok && !r.errors.empty()) {
      x.push_back(r.epsilon);
      y.push_back(*std::max_element(r.errors.begin(), r.errors.end()));
    }
  rep.aggregate_slope = fit_loglog_slope(x, y);
  return rep;
}

double nearest_relative_gap(double value, const std::vector<double>& targets) {
  double best = std::numeric_limits<double>::infinity();
  for (double t : targets) best = std::min(best, std::abs(value - t) / std::abs(t));
  return best;
}

RegimeReport run_regime_study(const ExperimentConfig& cfg) {
  RegimeReport rep;
  const auto geom = cfg.geometry();
  const auto A = cfg.coefficient_field();
  for (double p : cfg.regime_powers) {
    RegimeRow row;
    row.power = p;
    row.n = cfg.regime_n;
    row.epsilon = 1.0 / row.n;
    row.delta = std::pow(row.epsilon, p);
    row.kappa = row.epsilon * row.epsilon / row.delta;
    row.regime = regime_name(p);
    const auto t0 = Clock::now();
    try {
      const auto dom = build_epsilon_domain(geom, row.n, cfg.subcells);
      const auto op = assemble_fine_operator(dom, A, ContrastWeight(row.delta, row.epsilon));
      // Counting by inertia stays reliable inside the dense clusters of the
      // critical and perforated regimes, where subspace iteration crawls.
      SpectrumCounter counter(op.stiffness, op.mass);
      row.fine = counter.smallest(0, static_cast<std::size_t>(cfg.count), 1e-10);
      const auto grid_y = build_unit_cell_grid(geom, cfg.subcells);
      LinearOptions lin;
      lin.tolerance = cfg.linear_tolerance;
      if (row.regime == "homogenized") {
        const auto t = compute_homogenized_tensor(grid_y, A, row.delta, lin);
        row.predicted = homogenized_thetas(dom, t.entries, cfg, cfg.count);
        row.theta1 = row.predicted.front();
      } else if (row.regime == "critical") {
        const auto lim = limit_at_epsilon(cfg, row.n, row.delta, cfg.subcells, cfg.count + 4);
        for (const auto& e : lim.report.eta) row.predicted.push_back(1.0 / e.value);
        std::sort(row.predicted.begin(), row.predicted.end());
        const auto bloch = bloch_spectrum(lim.inclusion, dom.lattice, row.kappa);
        const double t = 1.0 / bloch.front().value;
        row.cluster_target = t;
        row.cluster_expected = bloch.front().multiplicity;
        row.cluster_found = counter.below(1.05 * t) - counter.below(0.95 * t);
        const auto w = nearest_eigenvalue_window(counter, t, row.cluster_expected, 1e-9);
        row.cluster_lowest = w.lowest;
        row.cluster_highest = w.highest;
        row.cluster_spread = (w.highest - w.lowest) / t;
      } else {
        const auto t0hat = compute_homogenized_tensor(grid_y, A, cfg.perforated_delta, lin);
        const auto spec = compute_inclusion_spectrum(grid_y, geom, A, cfg.inclusion_modes);
        for (double theta : homogenized_thetas(dom, t0hat.entries, cfg, cfg.count))
          row.predicted.push_back(theta / (1.0 - spec.theta));
        // Every inclusion mode μ/κ: residual roots pile up below the β poles as κ grows.
        for (double mu : spec.mu) row.predicted.push_back(mu / row.kappa);
        std::sort(row.predicted.begin(), row.predicted.end());
      }
      for (double v : row.fine) row.gaps.push_back(nearest_relative_gap(v, row.predicted));
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = seconds_since(t0);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

OracleReport run_oracle_check(const ExperimentConfig& cfg) {
  OracleReport out;
  out.n = cfg.oracle_n;
  out.resolution = cfg.oracle_resolution;
  out.kappa = cfg.oracle_kappa;
  const auto geom = cfg.geometry();
  const auto A = cfg.coefficient_field();
  const double eps = 1.0 / out.n;
  const double delta = eps * eps / out.kappa;

  const auto grid_y = build_unit_cell_grid(geom, out.resolution);
  LinearOptions lin;
  lin.tolerance = cfg.linear_tolerance;
  const auto a_hat = compute_homogenized_tensor(grid_y, A, delta, lin).entries;
  // Every discrete inclusion mode, so the β tail is exact.
  const auto spec = compute_inclusion_spectrum(grid_y, geom, A, std::numeric_limits<int>::max() / 2);
  const auto dom = build_epsilon_domain(geom, out.n, cfg.subcells);
  const auto comp = compress_homogenized_inverse(dom, a_hat);

  const auto bf = make_beta_function(spec, out.kappa);
  const auto roots = residual_roots(bf, comp.thetas, admissible_intervals(bf), eps);
  const auto bloch = bloch_spectrum(spec, dom.lattice, out.kappa);
  const auto rep = limit_eta(bloch, roots);
  out.predicted_values = rep.expanded();
  out.predicted = out.predicted_values.size();

  const auto oracle = two_scale_dense_oracle(comp, grid_y, A, out.kappa);
  out.dimension = oracle.values.size();
  out.oracle_values.assign(oracle.values.rbegin(), oracle.values.rend());
  if (out.oracle_values.size() < out.predicted)
    throw NumericalError("oracle spectrum is shorter than the predicted list");
  const double top = std::abs(out.oracle_values.front());
  for (std::size_t i = 0; i < out.predicted; ++i)
    out.max_relative_mismatch = std::max(
        out.max_relative_mismatch, std::abs(out.oracle_values[i] - out.predicted_values[i]) / out.predicted_values[i]);
  for (std::size_t i = out.predicted; i < out.oracle_values.size(); ++i)
    out.max_zero_tail = std::max(out.max_zero_tail, std::abs(out.oracle_values[i]) / top);

  out.min_residual_block_mean = std::numeric_limits<double>::infinity();
  const auto cells = static_cast<std::size_t>(std::pow(out.n, geom.dim()));
  for (std::size_t c = 0; c < oracle.values.size(); ++c) {
    const double v = oracle.values[c];
    if (std::abs(v) <= 1e-10 * top) continue;
    const auto means = oracle_block_means(oracle.vectors.col(static_cast<Eigen::Index>(c)), grid_y, cells);
    bool is_bloch = false;
    for (const auto& b : bloch) is_bloch |= std::abs(v - b.value) <= 1e-8 * b.value;
    if (is_bloch) {
      out.max_bloch_block_mean = std::max(out.max_bloch_block_mean, means.cwiseAbs().maxCoeff());
    } else {
      out.min_residual_block_mean = std::min(out.min_residual_block_mean, means.norm());
    }
  }
  return out;
}

std::string rates_csv(const RateReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "epsilon,n,delta,kappa,i,lambda_fine,eta,eta_branch,abs_error,status\n";
  for (const auto& row : r.rows) {
    if (!row.ok && row.errors.empty()) {
      os << row.epsilon << "," << row.n << "," << row.delta << "," << row.kappa << ",,,,,,failed\n";
      continue;
    }
    for (std::size_t i = 0; i < row.errors.size(); ++i)
      os << row.epsilon << "," << row.n << "," << row.delta << "," << row.kappa << "," << i + 1 << "," << row.fine[i]
         << "," << row.eta[i] << "," << to_string(row.branches[i]) << "," << row.errors[i] << ","
         << (row.ok ? "ok" : "failed") << "\n";
  }
  return os.str();
}

nlohmann::json slopes_json(const RateReport& r, bool timings) {
  nlohmann::json j;
  j["count"] = r.count;
  j["aggregate_slope"] = optional_json(r.aggregate_slope);
  auto slopes = nlohmann::json::array();
  for (const auto& s : r.slopes) slopes.push_back(optional_json(s));
  j["slopes"] = slopes;
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json e;
    e["n"] = row.n;
    e["epsilon"] = row.epsilon;
    e["delta"] = row.delta;
    e["kappa"] = row.kappa;
    e["ok"] = row.ok;
    e["paired"] = row.errors.size();
    e["fine_dofs"] = row.fine_dofs;
    e["fine_iterations"] = row.fine_iterations;
    if (!row.error.empty()) e["error"] = row.error;
    if (!row.errors.empty()) e["max_error"] = *std::max_element(row.errors.begin(), row.errors.end());
    if (timings) e["seconds"] = row.seconds;
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j;
}

std::string rates_plot_csv(const RateReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "x,y,series\n";
  for (std::size_t i = 0; i < static_cast<std::size_t>(r.count); ++i)
    for (const auto& row : r.rows)
      if (row.ok && i < row.errors.size()) os << row.epsilon << "," << row.errors[i] << ",i=" << i + 1 << "\n";
  for (const auto& row : r.rows)
    if (row.ok && !row.errors.empty())
      os << row.epsilon << "," << *std::max_element(row.errors.begin(), row.errors.end()) << ",max\n";
  return os.str();
}

std::string regimes_csv(const RegimeReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "p,regime,n,delta,kappa,i,fine,relative_gap\n";
  for (const auto& row : r.rows)
    for (std::size_t i = 0; i < row.gaps.size(); ++i)
      os << row.power << "," << row.regime << "," << row.n << "," << row.delta << "," << row.kappa << "," << i + 1
         << "," << row.fine[i] << "," << row.gaps[i] << "\n";
  return os.str();
}

nlohmann::json to_json(const RegimeReport& r, bool timings) {
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json e;
    e["p"] = row.power;
    e["regime"] = row.regime;
    e["n"] = row.n;
    e["epsilon"] = row.epsilon;
    e["delta"] = row.delta;
    e["kappa"] = row.kappa;
    e["ok"] = row.ok;
    if (!row.error.empty()) e["error"] = row.error;
    e["fine"] = row.fine;
    e["predicted"] = row.predicted;
    e["relative_gaps"] = row.gaps;
    if (row.regime == "homogenized") {
      e["theta1"] = row.theta1;
      if (!row.fine.empty()) e["leading_gap"] = std::abs(row.fine.front() - row.theta1) / row.theta1;
    }
    if (row.regime == "critical") {
      e["cluster_target"] = row.cluster_target;
      e["cluster_expected"] = row.cluster_expected;
      e["cluster_found_within_5pct"] = row.cluster_found;
      e["cluster_lowest"] = row.cluster_lowest;
      e["cluster_highest"] = row.cluster_highest;
      e["cluster_spread"] = row.cluster_spread;
    }
    if (timings) e["seconds"] = row.seconds;
    rows.push_back(e);
  }
  return {{"rows", rows}};
}

nlohmann::json to_json(const OracleReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["cell_resolution"] = r.resolution;
  j["kappa"] = r.kappa;
  j["dimension"] = r.dimension;
  j["predicted"] = r.predicted;
  j["max_relative_mismatch"] = r.max_relative_mismatch;
  j["max_zero_tail"] = r.max_zero_tail;
  j["max_bloch_block_mean"] = r.max_bloch_block_mean;
  j["min_residual_block_mean"] = r.min_residual_block_mean;
  j["oracle_values"] = r.oracle_values;
  j["predicted_values"] = r.predicted_values;
  return j;
}

}  // namespace homoglab
