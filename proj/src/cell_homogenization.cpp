#include "homoglab/cell_homogenization.hpp"

#include <cmath>
#include <sstream>

#include "homoglab/parallel.hpp"

namespace homoglab {
namespace {

struct CellData {
  ElementMatrices em;
  std::vector<Eigen::MatrixXd> tensors;  // Λ_δ A at each cell
  std::vector<double> lambda;
};

CellData cell_data(const StructuredGrid& grid, const CoefficientField& A, double delta) {
  CellData cd{element_matrices(grid), {}, {}};
  cd.tensors.resize(grid.num_cells());
  cd.lambda.resize(grid.num_cells());
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    cd.lambda[c] = grid.tag(c) == Region::inclusion ? delta : 1.0;
    cd.tensors[c] = cd.lambda[c] * A(grid.cell_barycenter(c));
  }
  return cd;
}

void check_inputs(const StructuredGrid& grid, const CoefficientField& A, double delta) {
  if (!grid.periodic() || !grid.tagged()) throw ValidationError("cell problems need a tagged periodic grid on Y");
  if (A.dim() != grid.dim()) throw ValidationError("coefficient dimension does not match the grid");
  if (!(delta > 0.0)) throw ValidationError("contrast delta must be positive");
}

// Local dof values of a node-major vector on one cell: out(p, γ).
Eigen::MatrixXd local_values(const StructuredGrid& grid, const Eigen::VectorXd& v, std::size_t cell, int m) {
  const auto cn = grid.cell_nodes(cell);
  Eigen::MatrixXd out(grid.nodes_per_cell(), m);
  for (int p = 0; p < grid.nodes_per_cell(); ++p)
    for (int g = 0; g < m; ++g)
      out(p, g) = v[static_cast<Eigen::Index>(cn[static_cast<std::size_t>(p)] * static_cast<std::size_t>(m)) + g];
  return out;
}

}  // namespace

CorrectorSet solve_correctors(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                              const LinearOptions& options) {
  check_inputs(grid_y, A, delta);
  const int d = grid_y.dim();
  const int m = A.components();
  const auto op = assemble_cell_operator(grid_y, A, delta);
  const CellData cd = cell_data(grid_y, A, delta);
  const auto n = static_cast<Eigen::Index>(op.dimension);

  // F^{jβ}_{(p,α)} = −∫ Λ a_{ij}^{αβ} ∂_i φ_p.
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, d * m);
  for (std::size_t c = 0; c < grid_y.num_cells(); ++c) {
    const auto cn = grid_y.cell_nodes(c);
    const auto& t = cd.tensors[c];
    for (int j = 0; j < d; ++j)
      for (int b = 0; b < m; ++b)
        for (int p = 0; p < grid_y.nodes_per_cell(); ++p)
          for (int a = 0; a < m; ++a) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += t(a * d + i, b * d + j) * cd.em.gradient_integral(i, p);
            rhs(static_cast<Eigen::Index>(cn[static_cast<std::size_t>(p)] * static_cast<std::size_t>(m)) + a,
                j * m + b) -= s;
          }
  }

  CorrectorSet out;
  out.dim = d;
  out.components = m;
  out.delta = delta;
  out.resolution = grid_y.resolution(0);
  out.nodes = grid_y.num_nodes();
  out.chi.resize(static_cast<std::size_t>(d * m));
  out.residuals.resize(static_cast<std::size_t>(d * m));
  std::vector<int> iterations(static_cast<std::size_t>(d * m), 0);
  const Eigen::MatrixXd z = op.deflation_basis();
  parallel_for(static_cast<std::size_t>(d * m), [&](std::size_t col) {
    LinearReport rep;
    Eigen::MatrixXd x = solve_spd(op.stiffness, rhs.col(static_cast<Eigen::Index>(col)), z, options, &rep);
    out.chi[col] = x.col(0);
    out.residuals[col] = rep.relative_residual;
    iterations[col] = rep.iterations;
  });
  for (int it : iterations) out.cg_iterations += it;

  // Integral mean zero per component (uniform periodic grids make this the
  // same as the Euclidean projection; kept explicit for clarity of contract).
  const Eigen::VectorXd w = op.mass * Eigen::VectorXd::Ones(n);
  for (auto& chi : out.chi) {
    for (int g = 0; g < m; ++g) {
      double num = 0.0, den = 0.0;
      for (Eigen::Index k = g; k < n; k += m) {
        num += w[k] * chi[k];
        den += w[k];
      }
      for (Eigen::Index k = g; k < n; k += m) chi[k] -= num / den;
    }
  }
  return out;
}

HomogenizedTensor homogenized_tensor(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                                     const CorrectorSet& chi) {
  check_inputs(grid_y, A, delta);
  const int d = grid_y.dim();
  const int m = A.components();
  if (chi.delta != delta || chi.dim != d || chi.components != m || chi.nodes != grid_y.num_nodes() ||
      chi.resolution != grid_y.resolution(0))
    throw ValidationError("correctors were computed on a different grid, coefficient or contrast");
  const CellData cd = cell_data(grid_y, A, delta);
  const double vol = grid_y.cell_volume();
  Eigen::MatrixXd ahat = Eigen::MatrixXd::Zero(d * m, d * m);
  for (std::size_t c = 0; c < grid_y.num_cells(); ++c) {
    const auto& t = cd.tensors[c];
    ahat += vol * t;
    for (int j = 0; j < d; ++j) {
      for (int b = 0; b < m; ++b) {
        // ∫_cell ∂_k χ_j^{γβ} = Σ_p χ(p,γ) ∫ ∂_k φ_p.
        const Eigen::MatrixXd loc = local_values(grid_y, chi.corrector(j, b), c, m);
        const Eigen::MatrixXd grad = cd.em.gradient_integral * loc;  // (k, γ)
        for (int a = 0; a < m; ++a)
          for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int g = 0; g < m; ++g)
              for (int k = 0; k < d; ++k) s += t(a * d + i, g * d + k) * grad(k, g);
            ahat(a * d + i, b * d + j) += s;
          }
      }
    }
  }
  HomogenizedTensor out;
  out.entries = ahat;
  out.dim = d;
  out.components = m;
  out.delta = delta;
  out.resolution = grid_y.resolution(0);
  out.symmetry_defect = (ahat - ahat.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (ahat + ahat.transpose()));
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.residuals = chi.residuals;
  out.cg_iterations = chi.cg_iterations;
  return out;
}

HomogenizedTensor compute_homogenized_tensor(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                                             const LinearOptions& options) {
  return homogenized_tensor(grid_y, A, delta, solve_correctors(grid_y, A, delta, options));
}

Eigen::MatrixXd energy_form(const StructuredGrid& grid_y, const CoefficientField& A, double delta,
                            const CorrectorSet& chi) {
  check_inputs(grid_y, A, delta);
  const int d = grid_y.dim();
  const int m = A.components();
  const int np = grid_y.nodes_per_cell();
  const CellData cd = cell_data(grid_y, A, delta);
  const double vol = grid_y.cell_volume();
  const int dm = d * m;
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dm, dm);
  for (std::size_t c = 0; c < grid_y.num_cells(); ++c) {
    const auto& t = cd.tensors[c];
    const Eigen::MatrixXd ke = element_stiffness(cd.em, t, m);
    // Local coefficient vectors of every corrector, rows p·m + γ.
    Eigen::MatrixXd u(np * m, dm);
    for (int col = 0; col < dm; ++col) {
      const Eigen::MatrixXd loc = local_values(grid_y, chi.chi[static_cast<std::size_t>(col)], c, m);
      for (int p = 0; p < np; ++p)
        for (int g = 0; g < m; ++g) u(p * m + g, col) = loc(p, g);
    }
    // Cross term ∫ Λ A e_j^β · ∇v for v = φ_p e^α, rows p·m + α, column j·m + β.
    Eigen::MatrixXd f(np * m, dm);
    for (int p = 0; p < np; ++p)
      for (int a = 0; a < m; ++a)
        for (int j = 0; j < d; ++j)
          for (int b = 0; b < m; ++b) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += t(a * d + i, b * d + j) * cd.em.gradient_integral(i, p);
            f(p * m + a, j * m + b) = s;
          }
    // Constant part in (α·d+i, β·d+j) indexing; map the j·m+β columns to it.
    Eigen::MatrixXd e_local = u.transpose() * ke * u + u.transpose() * f + f.transpose() * u;
    for (int r = 0; r < dm; ++r) {
      const int ri = r / m, ra = r % m;
      for (int s = 0; s < dm; ++s) {
        const int sj = s / m, sb = s % m;
        e(ra * d + ri, sb * d + sj) += e_local(r, s);
      }
    }
    e += vol * t;
  }
  return e;
}

DeltaSweep tensor_delta_sweep(const StructuredGrid& grid_y, const CoefficientField& A,
                              const std::vector<double>& deltas, const LinearOptions& options) {
  if (deltas.empty()) throw ValidationError("delta sweep needs at least one value");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw ValidationError("sweep deltas must be positive");
    if (i > 0 && deltas[i] < deltas[i - 1]) throw ValidationError("sweep deltas must be sorted ascending");
  }
  DeltaSweep out;
  for (double delta : deltas) out.tensors.push_back(compute_homogenized_tensor(grid_y, A, delta, options));
  for (std::size_t i = 1; i < out.tensors.size(); ++i) {
    const double prev = out.tensors[i - 1].entries(0, 0);
    const double cur = out.tensors[i].entries(0, 0);
    if (cur < prev - 1e-10 * std::abs(prev)) out.a11_nondecreasing = false;
  }
  return out;
}

nlohmann::json to_json(const HomogenizedTensor& t) {
  const Eigen::Index n = t.entries.rows();
  const Eigen::Index d = t.dim;
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      entries.push_back({{"i", r % d}, {"j", c % d}, {"alpha", r / d}, {"beta", c / d}, {"value", t.entries(r, c)}});
  return {{"dim", t.dim},
          {"components", t.components},
          {"delta", t.delta},
          {"resolution", t.resolution},
          {"min_eigenvalue", t.min_eigenvalue},
          {"symmetry_defect", t.symmetry_defect},
          {"cg_iterations", t.cg_iterations},
          {"residuals", t.residuals},
          {"entries", entries}};
}

}  // namespace homoglab
