#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "homoglab/coefficients.hpp"
#include "homoglab/eigensolve.hpp"
#include "homoglab/geometry.hpp"

namespace homoglab {

enum class ModeBranch { mean_zero, nonzero_mean };

std::string to_string(ModeBranch b);

inline constexpr double kMeanTol = 1e-8;

/// Dirichlet spectrum of L_{1,1} on ω with modes split by their mean.
struct InclusionSpectrum {
  std::vector<double> mu;         ///< ascending Dirichlet eigenvalues
  std::vector<double> inv;        ///< 1/μ, decreasing
  std::vector<double> psi_means;  ///< ∫_Y ψ_i with ‖ψ_i‖_{L²(Y)} = 1, ψ extended by 0
  std::vector<ModeBranch> branch;
  std::vector<double> weights;    ///< (∫ψ_i)² on the nonzero-mean branch, 0 otherwise
  std::vector<std::size_t> cluster_of;  ///< index into clusters
  std::vector<EigenCluster> clusters;   ///< clusters of mu
  double theta = 0.0;
  /// Discrete dimension of the inclusion operator; equal to mu.size() when
  /// every discrete mode was computed.
  std::size_t discrete_dimension = 0;
  int resolution = 0;
  /// M-orthonormal eigenvectors on the inclusion dofs (node-major, m = 1).
  Eigen::MatrixXd vectors;
  /// ∫ φ_dof over Y for each inclusion dof.
  Eigen::VectorXd integral_weights;

  std::size_t size() const { return mu.size(); }
  bool complete() const { return mu.size() == discrete_dimension; }
  double weight_sum() const;
  /// θ − Σ c_i: the Parseval tail left by truncation and discretization.
  double tail() const { return theta - weight_sum(); }

  /// Nonzero-mean branch as (β_i = inv, c_i), decreasing β.
  std::vector<double> betas() const;
  std::vector<double> beta_weights() const;
  /// Mean-zero inv values α_i, decreasing.
  std::vector<double> alphas() const;
};

/// `count` is a lower bound: the last degenerate cluster is always completed.
/// When count reaches the discrete dimension every mode is computed densely.
InclusionSpectrum compute_inclusion_spectrum(const StructuredGrid& grid_y, const PeriodicGeometry& geom,
                                             const CoefficientField& A, int count,
                                             EigenMethod method = EigenMethod::automatic, double tolerance = 1e-10,
                                             double mean_tol = kMeanTol);

struct BlochValue {
  double value = 0.0;             ///< κ α_i
  std::size_t multiplicity = 0;   ///< |Π̂_ε| × cluster dimension
  std::size_t cluster_dimension = 0;
};

/// Bloch values κα_i in decreasing order. Throws NumericalError when the
/// computed window holds no mean-zero mode.
std::vector<BlochValue> bloch_spectrum(const InclusionSpectrum& spec, const EpsilonLattice& lattice, double kappa);

/// CSV rows (index, mu, inv, mean, branch, c), no header.
std::string inclusion_spectrum_csv_rows(const InclusionSpectrum& spec);

}  // namespace homoglab
