#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "homoglab/coefficients.hpp"
#include "homoglab/fem.hpp"
#include "homoglab/linear_solve.hpp"

namespace homoglab {

/// Periodic mean-zero correctors χ_{j,δ}^{·β} on a unit-cell grid.
struct CorrectorSet {
  int dim = 0;
  int components = 0;
  double delta = 0.0;
  int resolution = 0;
  std::size_t nodes = 0;
  /// chi[j·m + β] is the dof vector (node-major, m entries per node) of the
  /// corrector for direction j and component β.
  std::vector<Eigen::VectorXd> chi;
  std::vector<double> residuals;
  int cg_iterations = 0;

  const Eigen::VectorXd& corrector(int direction, int component) const {
    return chi[static_cast<std::size_t>(direction * components + component)];
  }
};

struct HomogenizedTensor {
  Eigen::MatrixXd entries;  ///< dm×dm, index α·d + i
  int dim = 0;
  int components = 0;
  double delta = 0.0;
  int resolution = 0;
  double min_eigenvalue = 0.0;
  double symmetry_defect = 0.0;
  std::vector<double> residuals;
  int cg_iterations = 0;
};

CorrectorSet solve_correctors(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                              const LinearOptions& options = {});

/// Â_δ from correctors: ∫ Λ_δ [a + a ∇χ] with exact per-cell integrals.
HomogenizedTensor homogenized_tensor(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                                     const CorrectorSet& chi);

HomogenizedTensor compute_homogenized_tensor(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                                             const LinearOptions& options = {});

/// Energy form E[(α,i),(β,j)] = ∫ Λ_δ A(e_j^β + ∇χ_j^β)·(e_i^α + ∇χ_i^α),
/// equal to Â_δ for symmetric A.
Eigen::MatrixXd energy_form(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                            const CorrectorSet& chi);

struct DeltaSweep {
  std::vector<HomogenizedTensor> tensors;
  bool a11_nondecreasing = true;
};

DeltaSweep tensor_delta_sweep(const StructuredGrid& grid_y, const CoefficientField& A,
                              const std::vector<double>& deltas, const LinearOptions& options = {});

nlohmann::json to_json(const HomogenizedTensor& t);

}  // namespace homoglab
