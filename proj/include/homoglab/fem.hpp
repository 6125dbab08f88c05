#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "homoglab/coefficients.hpp"
#include "homoglab/geometry.hpp"

namespace homoglab {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Constraint { dirichlet, periodic_mean_zero, periodic };

std::string to_string(Constraint c);

/// Q1 stiffness/mass pair on a structured grid.
///
/// Dof numbering is node-major: dof = dof_node · m + α, where dof_node is
/// the position of the grid node in dof_to_node. Constrained nodes map to -1.
struct SparseSymmetricOperator {
  std::size_t dimension = 0;
  int components = 1;
  Constraint constraint = Constraint::dirichlet;
  SparseMatrix stiffness;
  SparseMatrix mass;
  std::vector<std::int64_t> node_to_dof;
  std::vector<std::size_t> dof_to_node;

  /// Columns spanning the discrete null space removed by the constraint:
  /// one constant vector per component for periodic_mean_zero, empty otherwise.
  Eigen::MatrixXd deflation_basis() const;
};

/// Exact integrals of Q1 shape-function products over one grid cell.
struct ElementMatrices {
  int dim = 0;
  int nodes = 0;
  /// grad[i·d + j](p,q) = ∫ ∂_i φ_p ∂_j φ_q.
  std::vector<Eigen::MatrixXd> grad;
  /// mass(p,q) = ∫ φ_p φ_q.
  Eigen::MatrixXd mass;
  /// gradient_integral(i,p) = ∫ ∂_i φ_p.
  Eigen::MatrixXd gradient_integral;
  /// ∫ φ_p, equal for all p.
  double shape_integral = 0.0;
};

ElementMatrices element_matrices(const StructuredGrid& grid);

/// Element stiffness of a constant dm×dm tensor, rows (p·m + α).
Eigen::MatrixXd element_stiffness(const ElementMatrices& em, const Eigen::MatrixXd& tensor, int components);

/// Per-cell tensor (already multiplied by any contrast weight). Cells for
/// which `active` is false contribute neither stiffness nor mass.
using CellTensor = std::function<Eigen::MatrixXd(std::size_t cell)>;

SparseSymmetricOperator assemble_operator(const StructuredGrid& grid, int components, Constraint constraint,
                                          std::vector<std::int64_t> node_to_dof, const CellTensor& tensor,
                                          const std::vector<char>& active);

/// Node → dof maps for the supported constraint layouts.
std::vector<std::int64_t> interior_node_map(const StructuredGrid& grid);
std::vector<std::int64_t> all_node_map(const StructuredGrid& grid);
/// Nodes all of whose adjacent cells carry the inclusion tag.
std::vector<std::int64_t> inclusion_interior_node_map(const StructuredGrid& grid);

/// L_{ε,δ} on Ω with zero Dirichlet data; A sampled at y = {x/ε} of each
/// cell barycenter and weighted by δ on inclusion cells.
SparseSymmetricOperator assemble_fine_operator(const EpsilonDomain& domain, const CoefficientField& A,
                                               const ContrastWeight& w);

/// Periodic L_{1,δ} on Y; constraint periodic_mean_zero (null space handled
/// by deflation, see deflation_basis).
SparseSymmetricOperator assemble_cell_operator(const StructuredGrid& grid_y, const CoefficientField& A, double delta);

/// L_{ω,y}: Dirichlet problem on the inclusion with contrast 1.
SparseSymmetricOperator assemble_inclusion_operator(const StructuredGrid& grid_y, const CoefficientField& A);

/// Constant-coefficient Dirichlet operator on Ω. A_hat is dm×dm.
SparseSymmetricOperator assemble_homogenized_operator(const StructuredGrid& grid_omega, const Eigen::MatrixXd& A_hat);

/// ∫ φ_dof over the whole grid for every dof (component-blind). Unlike mass
/// row sums this includes contributions from constrained neighbours.
Eigen::VectorXd shape_integrals(const StructuredGrid& grid, const SparseSymmetricOperator& op);

/// Writes <prefix>_K.mtx and <prefix>_M.mtx in MatrixMarket coordinate format.
void export_matrix_market(const SparseSymmetricOperator& op, const std::string& prefix);

}  // namespace homoglab
