#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace homoglab {

enum class LinearMethod { cg, direct };

struct LinearOptions {
  LinearMethod method = LinearMethod::cg;
  double tolerance = 1e-11;  ///< relative residual ‖b − Kx‖/‖b‖ for CG
  int max_iterations = 20000;
};

struct LinearReport {
  int iterations = 0;  ///< summed over right-hand sides; 0 for direct solves
  double relative_residual = 0.0;  ///< worst over right-hand sides
  bool converged = true;
};

/// Solves K X = B for symmetric positive (semi)definite K.
///
/// When `null_space` has columns, K is taken to be singular exactly on their
/// span: each right-hand side is projected onto its Euclidean orthogonal
/// complement, CG runs in that complement, and the direct route pins one dof
/// per null vector. Solutions are returned with zero component along the
/// null space in the Euclidean inner product; callers normalize further.
/// CG non-convergence raises NumericalError.
Eigen::MatrixXd solve_spd(const Eigen::SparseMatrix<double>& K, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& null_space, const LinearOptions& options,
                          LinearReport* report = nullptr);

}  // namespace homoglab
