#include "homoglab/inclusion_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "homoglab/fem.hpp"

namespace homoglab {

std::string to_string(ModeBranch b) { return b == ModeBranch::mean_zero ? "mean_zero" : "nonzero_mean"; }

double InclusionSpectrum::weight_sum() const {
  double s = 0.0;
  for (double c : weights) s += c;
  return s;
}

std::vector<double> InclusionSpectrum::betas() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (branch[i] == ModeBranch::nonzero_mean) out.push_back(inv[i]);
  return out;
}

std::vector<double> InclusionSpectrum::beta_weights() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (branch[i] == ModeBranch::nonzero_mean) out.push_back(weights[i]);
  return out;
}

std::vector<double> InclusionSpectrum::alphas() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (branch[i] == ModeBranch::mean_zero) out.push_back(inv[i]);
  return out;
}

InclusionSpectrum compute_inclusion_spectrum(const StructuredGrid& grid_y, const PeriodicGeometry& geom,
                                             const CoefficientField& A, int count, EigenMethod method,
                                             double tolerance, double mean_tol) {
  if (count < 4) throw ValidationError("inclusion spectrum needs at least 4 modes");
  if (A.components() != 1) throw ValidationError("inclusion spectrum is implemented for scalar problems (m = 1)");
  const auto op = assemble_inclusion_operator(grid_y, A);
  const auto dim = static_cast<int>(op.dimension);

  InclusionSpectrum out;
  out.theta = geom.theta();
  out.discrete_dimension = op.dimension;
  out.resolution = grid_y.resolution(0);
  out.integral_weights = shape_integrals(grid_y, op);

  EigenResult res;
  std::size_t keep = 0;
  if (count >= dim) {
    res = dense_oracle_eigens(op);
    keep = res.values.size();
  } else {
    auto req = make_request(op, std::min(dim, count + 8), tolerance);
    req.method = method;
    res = smallest_eigenpairs(req);
    res.require_converged();
    keep = static_cast<std::size_t>(count);
    // Complete the cluster containing the last kept mode.
    const auto cl = res.clusters();
    for (const auto& c : cl) {
      if (c.first < keep && c.first + c.dimension > keep) {
        if (c.first + c.dimension == res.values.size() && res.values.size() < op.dimension)
          throw NumericalError("degenerate cluster at the end of the computed window; increase the mode count");
        keep = c.first + c.dimension;
      }
    }
  }
  out.mu.assign(res.values.begin(), res.values.begin() + static_cast<std::ptrdiff_t>(keep));
  out.vectors = res.vectors.leftCols(static_cast<Eigen::Index>(keep));
  out.clusters = cluster_values(out.mu);

  // Diagonalize the mean functional within each cluster: at most one vector
  // per cluster carries the mean.
  const Eigen::VectorXd& w = out.integral_weights;
  out.cluster_of.assign(keep, 0);
  for (std::size_t ci = 0; ci < out.clusters.size(); ++ci) {
    const auto& c = out.clusters[ci];
    const auto first = static_cast<Eigen::Index>(c.first);
    const auto dimc = static_cast<Eigen::Index>(c.dimension);
    for (std::size_t k = c.first; k < c.first + c.dimension; ++k) out.cluster_of[k] = ci;
    if (dimc == 1) continue;
    Eigen::MatrixXd v = out.vectors.middleCols(first, dimc);
    const Eigen::VectorXd g = v.transpose() * w;
    if (g.norm() <= mean_tol) continue;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ();
    out.vectors.middleCols(first, dimc) = v * q;
  }

  out.inv.resize(keep);
  out.psi_means.resize(keep);
  out.branch.resize(keep);
  out.weights.resize(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    double mean = w.dot(out.vectors.col(col));
    if (mean < 0.0) {
      out.vectors.col(col) *= -1.0;
      mean = -mean;
    }
    out.inv[k] = 1.0 / out.mu[k];
    out.psi_means[k] = mean;
    out.branch[k] = mean <= mean_tol ? ModeBranch::mean_zero : ModeBranch::nonzero_mean;
    out.weights[k] = out.branch[k] == ModeBranch::nonzero_mean ? mean * mean : 0.0;
  }
  return out;
}

std::vector<BlochValue> bloch_spectrum(const InclusionSpectrum& spec, const EpsilonLattice& lattice, double kappa) {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  std::vector<BlochValue> out;
  for (std::size_t ci = 0; ci < spec.clusters.size(); ++ci) {
    const auto& c = spec.clusters[ci];
    std::size_t zeros = 0;
    for (std::size_t k = c.first; k < c.first + c.dimension; ++k) zeros += spec.branch[k] == ModeBranch::mean_zero;
    if (zeros == 0) continue;
    out.push_back({kappa / c.value, lattice.cell_count() * zeros, zeros});
  }
  if (out.empty())
    throw NumericalError("no mean-zero inclusion modes in the computed window; increase the mode count");
  return out;
}

std::string inclusion_spectrum_csv_rows(const InclusionSpectrum& spec) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t k = 0; k < spec.size(); ++k)
    os << k << "," << spec.mu[k] << "," << spec.inv[k] << "," << spec.psi_means[k] << "," << to_string(spec.branch[k])
       << "," << spec.weights[k] << "\n";
  return os.str();
}

}  // namespace homoglab
