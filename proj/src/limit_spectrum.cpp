#include "homoglab/limit_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "homoglab/errors.hpp"
#include "homoglab/fem.hpp"
#include "homoglab/parallel.hpp"

namespace homoglab {

namespace {

// Point value of β_κ without window or pole checks; the tail enters with
// factor 1.
double beta_point(const BetaFunction& bf, double lambda) {
  double s = (1.0 - bf.theta + bf.tail_mass) * lambda;
  for (std::size_t i = 0; i < bf.betas.size(); ++i) s += bf.weights[i] * lambda / (1.0 - bf.kappa * bf.betas[i] * lambda);
  return s;
}

struct DenseCellSpaces {
  Eigen::MatrixXd mass;       // periodic Q1 mass on Y
  Eigen::MatrixXd extension;  // M_Y E: columns are inclusion dofs
  Eigen::MatrixXd k_omega;
  Eigen::MatrixXd m_omega;
};

DenseCellSpaces dense_cell_spaces(const StructuredGrid& grid_y, const CoefficientField& A) {
  if (A.components() != 1) throw ValidationError("limit spectrum is implemented for scalar problems (m = 1)");
  if (grid_y.num_nodes() > kDenseCap)
    throw ValidationError("unit-cell grid has " + std::to_string(grid_y.num_nodes()) +
                          " nodes, above the dense cap " + std::to_string(kDenseCap));
  const auto cell = assemble_cell_operator(grid_y, A, 1.0);
  const auto inc = assemble_inclusion_operator(grid_y, A);
  DenseCellSpaces s;
  s.mass = Eigen::MatrixXd(cell.mass);
  const auto ny = static_cast<Eigen::Index>(cell.dimension);
  const auto nw = static_cast<Eigen::Index>(inc.dimension);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(ny, nw);
  for (Eigen::Index k = 0; k < nw; ++k) {
    const auto node = inc.dof_to_node[static_cast<std::size_t>(k)];
    e(cell.node_to_dof[node], k) = 1.0;
  }
  s.extension = s.mass * e;
  s.k_omega = Eigen::MatrixXd(inc.stiffness);
  s.m_omega = Eigen::MatrixXd(inc.mass);
  return s;
}

}  // namespace

double BetaFunction::pole(std::size_t i) const {
  if (i == 0) return 0.0;
  if (i > betas.size()) return std::numeric_limits<double>::infinity();
  return 1.0 / (kappa * betas[i - 1]);
}

BetaFunction make_beta_function(const InclusionSpectrum& spec, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("kappa must be positive and finite");
  BetaFunction bf;
  bf.kappa = kappa;
  bf.theta = spec.theta;
  bf.betas = spec.betas();
  bf.weights = spec.beta_weights();
  for (std::size_t i = 1; i < bf.betas.size(); ++i)
    if (!(bf.betas[i] < bf.betas[i - 1])) throw NumericalError("nonzero-mean β values are not strictly decreasing");
  bf.tail_mass = spec.theta - spec.weight_sum();
  bf.complete = spec.complete();
  if (!bf.complete) {
    bf.tail_beta_max = 1.0 / spec.mu.back();
    bf.window_cap = 0.9 * spec.mu.back() / kappa;
  }
  return bf;
}

BetaValue beta_eval(const BetaFunction& bf, double lambda) {
  if (!std::isfinite(lambda)) throw ValidationError("λ must be finite");
  if (lambda > bf.window_cap) {
    std::ostringstream msg;
    msg << "λ = " << lambda << " lies beyond the trusted window " << bf.window_cap;
    throw ValidationError(msg.str());
  }
  for (std::size_t i = 1; i <= bf.pole_count(); ++i) {
    const double p = bf.pole(i);
    if (std::abs(lambda - p) <= 1e-10 * p) {
      std::ostringstream msg;
      msg << "λ = " << lambda << " is at the pole " << p;
      throw ValidationError(msg.str());
    }
  }
  BetaValue out;
  out.value = beta_point(bf, lambda);
  // Tail contribution λ·tail·f with f = 1/(1 − κβλ), β ∈ [0, tail_beta_max].
  const double f_other = 1.0 / (1.0 - bf.kappa * bf.tail_beta_max * lambda);
  const double t1 = lambda * bf.tail_mass;
  const double t2 = lambda * bf.tail_mass * f_other;
  out.lower = out.value - t1 + std::min(t1, t2);
  out.upper = out.value - t1 + std::max(t1, t2);
  return out;
}

double beta_derivative(const BetaFunction& bf, double lambda) {
  double s = 1.0 - bf.theta + bf.tail_mass;
  for (std::size_t i = 0; i < bf.betas.size(); ++i) {
    const double q = 1.0 - bf.kappa * bf.betas[i] * lambda;
    s += bf.weights[i] / (q * q);
  }
  return s;
}

ResolventOracle::ResolventOracle(const StructuredGrid& grid_y, const CoefficientField& A) {
  const auto s = dense_cell_spaces(grid_y, A);
  mass_ = s.mass;
  weights_ = s.mass * Eigen::VectorXd::Ones(s.mass.rows());
  Eigen::LLT<Eigen::MatrixXd> k(s.k_omega);
  if (k.info() != Eigen::Success) throw NumericalError("inclusion stiffness is not positive definite");
  inverse_ = s.extension * k.solve(s.extension.transpose());
  inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(s.k_omega, s.m_omega);
  for (Eigen::Index i = es.eigenvalues().size() - 1; i >= 0; --i) inverse_values_.push_back(1.0 / es.eigenvalues()[i]);
}

double ResolventOracle::gamma(double kappa, double lambda) const {
  if (!std::isfinite(lambda) || !std::isfinite(kappa) || kappa < 0.0) throw ValidationError("invalid κ or λ");
  double dist = std::abs(lambda);
  for (double b : inverse_values_) dist = std::min(dist, std::abs(lambda - kappa * b));
  if (dist <= 1e-10 * std::max(1.0, std::abs(lambda))) {
    std::ostringstream msg;
    msg << "resolvent is singular at λ = " << lambda << ": distance " << dist << " to the spectrum of κL⁻¹";
    throw NumericalError(msg.str());
  }
  const Eigen::MatrixXd h = kappa * inverse_ - lambda * mass_;
  const Eigen::VectorXd u = h.partialPivLu().solve(weights_);
  // u solves (κL⁻¹ − λ)u = 1 in the Galerkin sense; γ = −∫u.
  return -weights_.dot(u);
}

double gamma_eval_oracle(double kappa, double lambda, const StructuredGrid& grid_y, const CoefficientField& A) {
  return ResolventOracle(grid_y, A).gamma(kappa, lambda);
}

std::size_t admissible_intervals(const BetaFunction& bf) {
  if (bf.complete) return bf.pole_count() + 1;
  std::size_t count = 0;
  while (count + 1 < bf.pole_count() && bf.pole(count + 1) < bf.window_cap) ++count;
  return count;
}

std::vector<ResidualRoot> residual_roots(const BetaFunction& bf, const std::vector<double>& thetas,
                                         std::size_t intervals, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("ε must be positive");
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    if (!(thetas[j] > 0.0)) throw ValidationError("θ_j must be positive");
    if (j > 0 && thetas[j] < thetas[j - 1]) throw ValidationError("θ_j must be ascending");
  }
  if (intervals > admissible_intervals(bf))
    throw ValidationError("requested " + std::to_string(intervals) + " pole intervals, only " +
                          std::to_string(admissible_intervals(bf)) + " lie inside the computed window");

  std::vector<ResidualRoot> out(intervals * thetas.size());
  parallel_for(out.size(), [&](std::size_t slot) {
    const std::size_t i = slot / thetas.size();
    const std::size_t j = slot % thetas.size();
    const double target = thetas[j];
    const double left = bf.pole(i);
    const double right = bf.pole(i + 1);
    const bool bounded = std::isfinite(right);

    // Unbounded last interval: grow the right end until β exceeds θ_j.
    double far = right;
    if (!bounded) {
      far = std::max(2.0 * left, 1.0);
      for (int k = 0; k < 400 && beta_point(bf, far) <= target; ++k) far *= 2.0;
    }
    const double width = far - left;
    double lo = left, hi = far;
    bool bracketed = false;
    for (double rel = 1e-6; rel >= 1e-8 * (1 - 1e-12); rel /= 10.0) {
      const double margin = rel * width;
      lo = i == 0 ? 0.0 : left + margin;
      hi = bounded ? right - margin : far;
      if (beta_point(bf, lo) < target && beta_point(bf, hi) > target) {
        bracketed = true;
        break;
      }
    }
    if (!bracketed) {
      std::ostringstream msg;
      msg << "root of β_κ = θ_" << j << " in interval " << i << " is pushed against a pole margin";
      throw NumericalError(msg.str());
    }
    const double tol = 1e-10 * (1.0 + target);
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
      mid = 0.5 * (lo + hi);
      const double f = beta_point(bf, mid) - target;
      if (std::abs(f) <= tol * 1e-3 || mid <= lo || mid >= hi) break;
      (f < 0.0 ? lo : hi) = mid;
    }
    ResidualRoot r;
    r.interval = i;
    r.j = j;
    r.theta_j = target;
    r.lambda = mid;
    r.bracket_lo = left;
    r.bracket_hi = right;
    r.residual = std::abs(beta_point(bf, mid) - target);
    r.defect_bound = epsilon * (1.0 + mid / target);
    out[slot] = r;
  });
  return out;
}

std::string to_string(EtaBranch b) { return b == EtaBranch::bloch ? "bloch" : "residual"; }

std::vector<double> LimitSpectrumReport::expanded(std::size_t limit) const {
  std::vector<double> out;
  for (const auto& e : eta) {
    for (std::size_t k = 0; k < e.multiplicity && out.size() < limit; ++k) out.push_back(e.value);
    if (out.size() >= limit) break;
  }
  return out;
}

LimitSpectrumReport limit_eta(const std::vector<BlochValue>& bloch, const std::vector<ResidualRoot>& roots) {
  LimitSpectrumReport rep;
  rep.bloch = bloch;
  rep.residual = roots;
  for (std::size_t k = 0; k < bloch.size(); ++k) rep.eta.push_back({bloch[k].value, bloch[k].multiplicity, EtaBranch::bloch, k});
  for (std::size_t k = 0; k < roots.size(); ++k) rep.eta.push_back({1.0 / roots[k].lambda, 1, EtaBranch::residual, k});
  std::stable_sort(rep.eta.begin(), rep.eta.end(), [](const EtaEntry& a, const EtaEntry& b) { return a.value > b.value; });
  return rep;
}

std::string limit_spectrum_csv(const LimitSpectrumReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "branch,i,j,value,bracket_lo,bracket_hi,residual,theorem3_defect_bound\n";
  for (const auto& e : report.eta) {
    if (e.branch == EtaBranch::bloch) {
      os << "bloch," << e.index << ",," << e.value << ",,,,\n";
      continue;
    }
    // Residual rows in η = 1/λ, bracket (1/p_{i+1}, 1/p_i).
    const auto& r = report.residual[e.index];
    os << "residual," << r.interval << "," << r.j << "," << e.value << "," << 1.0 / r.bracket_hi << ","
       << (r.bracket_lo > 0.0 ? 1.0 / r.bracket_lo : std::numeric_limits<double>::infinity()) << "," << r.residual
       << "," << r.defect_bound << "\n";
  }
  return os.str();
}

CompressedHomogenized compress_homogenized_inverse(const EpsilonDomain& domain, const Eigen::MatrixXd& A_hat) {
  const auto& grid = domain.grid;
  if (!grid.has_lattice()) throw ValidationError("compression needs an ε-domain grid");
  if (A_hat.rows() != grid.dim()) throw ValidationError("compression is implemented for scalar problems (m = 1)");
  const auto op = assemble_homogenized_operator(grid, A_hat);
  const auto cells = static_cast<Eigen::Index>(std::pow(grid.lattice_n(), grid.dim()));
  const double scale = element_matrices(grid).shape_integral * std::pow(grid.lattice_n(), 0.5 * grid.dim());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(op.dimension), cells);
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    const auto k = static_cast<Eigen::Index>(grid.epsilon_cell_of(c));
    const auto nodes = grid.cell_nodes(c);
    for (int p = 0; p < grid.nodes_per_cell(); ++p) {
      const auto dof = op.node_to_dof[nodes[static_cast<std::size_t>(p)]];
      if (dof >= 0) b(dof, k) += scale;
    }
  }
  Eigen::SimplicialLDLT<SparseMatrix> k(op.stiffness);
  if (k.info() != Eigen::Success) throw NumericalError("homogenized stiffness factorization failed");
  const Eigen::MatrixXd x = k.solve(b);
  CompressedHomogenized out;
  out.G = b.transpose() * x;
  out.G = 0.5 * (out.G + out.G.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.G);
  for (Eigen::Index i = cells - 1; i >= 0; --i) out.thetas.push_back(1.0 / es.eigenvalues()[i]);
  return out;
}

EigenResult two_scale_dense_oracle(const CompressedHomogenized& g, const StructuredGrid& grid_y,
                                   const CoefficientField& A, double kappa) {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  const auto cells = g.G.rows();
  const auto ny = static_cast<Eigen::Index>(grid_y.num_nodes());
  const auto total = cells * ny;
  if (static_cast<std::size_t>(total) > kDenseCap)
    throw ValidationError("two-scale oracle dimension " + std::to_string(total) + " exceeds the dense cap " +
                          std::to_string(kDenseCap));
  const auto s = dense_cell_spaces(grid_y, A);
  const Eigen::VectorXd w = s.mass * Eigen::VectorXd::Ones(ny);
  Eigen::LLT<Eigen::MatrixXd> k(s.k_omega);
  Eigen::MatrixXd inv = s.extension * k.solve(s.extension.transpose());
  inv = 0.5 * (inv + inv.transpose()).eval();
  const Eigen::MatrixXd wwt = w * w.transpose();

  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(total, total);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(total, total);
  for (Eigen::Index a = 0; a < cells; ++a) {
    for (Eigen::Index b = 0; b < cells; ++b) op.block(a * ny, b * ny, ny, ny) = g.G(a, b) * wwt;
    op.block(a * ny, a * ny, ny, ny) += kappa * inv;
    mass.block(a * ny, a * ny, ny, ny) = s.mass;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(op, mass);
  if (es.info() != Eigen::Success) throw NumericalError("dense two-scale eigensolver failed");
  EigenResult out;
  out.method = EigenMethod::dense;
  out.converged = true;
  out.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + total);
  out.vectors = es.eigenvectors();
  const double scale = op.norm();
  for (Eigen::Index c = 0; c < total; ++c) {
    const Eigen::VectorXd v = out.vectors.col(c);
    out.residuals.push_back((op * v - out.values[static_cast<std::size_t>(c)] * (mass * v)).norm() / scale);
  }
  return out;
}

Eigen::VectorXd oracle_block_means(const Eigen::VectorXd& v, const StructuredGrid& grid_y, std::size_t cells) {
  const auto ny = static_cast<Eigen::Index>(grid_y.num_nodes());
  if (v.size() != ny * static_cast<Eigen::Index>(cells)) throw ValidationError("vector does not match the oracle layout");
  const auto cell = assemble_cell_operator(grid_y, CoefficientField::identity(grid_y.dim()), 1.0);
  const Eigen::VectorXd w = cell.mass * Eigen::VectorXd::Ones(ny);
  Eigen::VectorXd out(static_cast<Eigen::Index>(cells));
  for (Eigen::Index a = 0; a < out.size(); ++a) out[a] = w.dot(v.segment(a * ny, ny));
  return out;
}

}  // namespace homoglab
