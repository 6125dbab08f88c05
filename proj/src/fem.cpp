#include "homoglab/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/SparseExtra>

#include "homoglab/parallel.hpp"

namespace homoglab {
namespace {

constexpr std::size_t kAssemblyChunks = 64;

double mass1(int a, int b, double h) { return h / 6.0 * (a == b ? 2.0 : 1.0); }
double stiff1(int a, int b, double h) { return (a == b ? 1.0 : -1.0) / h; }
// ∫ φ'_a φ_b on one interval; independent of b.
double mixed1(int a) { return a ? 0.5 : -0.5; }

}  // namespace

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::dirichlet: return "dirichlet";
    case Constraint::periodic_mean_zero: return "periodic-mean-zero";
    case Constraint::periodic: return "periodic";
  }
  return "unknown";
}

Eigen::MatrixXd SparseSymmetricOperator::deflation_basis() const {
  if (constraint != Constraint::periodic_mean_zero) return Eigen::MatrixXd(static_cast<Eigen::Index>(dimension), 0);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dimension), components);
  for (std::size_t k = 0; k < dimension; ++k) z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k) % components) = 1.0;
  return z;
}

ElementMatrices element_matrices(const StructuredGrid& grid) {
  ElementMatrices em;
  const int d = grid.dim();
  em.dim = d;
  em.nodes = 1 << d;
  std::vector<double> h(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) h[static_cast<std::size_t>(k)] = grid.spacing(k);
  auto bit = [](int p, int k) { return (p >> k) & 1; };

  em.grad.assign(static_cast<std::size_t>(d * d), Eigen::MatrixXd::Zero(em.nodes, em.nodes));
  em.mass = Eigen::MatrixXd::Zero(em.nodes, em.nodes);
  em.gradient_integral = Eigen::MatrixXd::Zero(d, em.nodes);
  em.shape_integral = 1.0;
  for (int k = 0; k < d; ++k) em.shape_integral *= h[static_cast<std::size_t>(k)] / 2.0;

  for (int p = 0; p < em.nodes; ++p) {
    for (int q = 0; q < em.nodes; ++q) {
      double m = 1.0;
      for (int k = 0; k < d; ++k) m *= mass1(bit(p, k), bit(q, k), h[static_cast<std::size_t>(k)]);
      em.mass(p, q) = m;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          double g = 1.0;
          for (int k = 0; k < d; ++k) {
            const double hk = h[static_cast<std::size_t>(k)];
            if (k == i && k == j) g *= stiff1(bit(p, k), bit(q, k), hk);
            else if (k == i) g *= mixed1(bit(p, k));
            else if (k == j) g *= mixed1(bit(q, k));
            else g *= mass1(bit(p, k), bit(q, k), hk);
          }
          em.grad[static_cast<std::size_t>(i * d + j)](p, q) = g;
        }
      }
    }
    for (int i = 0; i < d; ++i) {
      double g = 1.0;
      for (int k = 0; k < d; ++k) g *= k == i ? (bit(p, k) ? 1.0 : -1.0) : h[static_cast<std::size_t>(k)] / 2.0;
      em.gradient_integral(i, p) = g;
    }
  }
  return em;
}

Eigen::MatrixXd element_stiffness(const ElementMatrices& em, const Eigen::MatrixXd& tensor, int components) {
  const int d = em.dim;
  const int m = components;
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(em.nodes * m, em.nodes * m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          const double t = tensor(a * d + i, b * d + j);
          if (t == 0.0) continue;
          const auto& g = em.grad[static_cast<std::size_t>(i * d + j)];
          for (int p = 0; p < em.nodes; ++p)
            for (int q = 0; q < em.nodes; ++q) ke(p * m + a, q * m + b) += t * g(p, q);
        }
      }
    }
  }
  return ke;
}

SparseSymmetricOperator assemble_operator(const StructuredGrid& grid, int components, Constraint constraint,
                                          std::vector<std::int64_t> node_to_dof, const CellTensor& tensor,
                                          const std::vector<char>& active) {
  if (node_to_dof.size() != grid.num_nodes()) throw ValidationError("node map size does not match the grid");
  if (active.size() != grid.num_cells()) throw ValidationError("active-cell mask size does not match the grid");
  SparseSymmetricOperator op;
  op.components = components;
  op.constraint = constraint;
  for (std::size_t node = 0; node < node_to_dof.size(); ++node) {
    if (node_to_dof[node] >= 0) {
      node_to_dof[node] = static_cast<std::int64_t>(op.dof_to_node.size());
      op.dof_to_node.push_back(node);
    }
  }
  op.node_to_dof = std::move(node_to_dof);
  op.dimension = op.dof_to_node.size() * static_cast<std::size_t>(components);
  if (op.dimension == 0) throw ValidationError("operator has no free degrees of freedom");

  const ElementMatrices em = element_matrices(grid);
  const int nodes = em.nodes;
  const int m = components;
  const std::size_t chunks = std::min(kAssemblyChunks, grid.num_cells());
  std::vector<std::vector<Eigen::Triplet<double>>> k_parts(chunks), m_parts(chunks);

  parallel_chunks(grid.num_cells(), chunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& kt = k_parts[chunk];
    auto& mt = m_parts[chunk];
    Eigen::MatrixXd last_tensor;
    Eigen::MatrixXd ke;
    for (std::size_t cell = begin; cell < end; ++cell) {
      if (!active[cell]) continue;
      const auto cn = grid.cell_nodes(cell);
      std::array<std::int64_t, 1 << kMaxDim> dofs{};
      bool any = false;
      for (int p = 0; p < nodes; ++p) {
        dofs[static_cast<std::size_t>(p)] = op.node_to_dof[cn[static_cast<std::size_t>(p)]];
        any = any || dofs[static_cast<std::size_t>(p)] >= 0;
      }
      if (!any) continue;
      Eigen::MatrixXd t = tensor(cell);
      if (t.rows() != grid.dim() * m || t.cols() != grid.dim() * m)
        throw ValidationError("cell tensor has the wrong shape");
      if (!t.allFinite()) throw NumericalError("non-finite coefficient at cell " + std::to_string(cell));
      if (last_tensor.size() == 0 || t != last_tensor) {
        ke = element_stiffness(em, t, m);
        last_tensor = std::move(t);
      }
      for (int p = 0; p < nodes; ++p) {
        const auto dp = dofs[static_cast<std::size_t>(p)];
        if (dp < 0) continue;
        for (int q = 0; q < nodes; ++q) {
          const auto dq = dofs[static_cast<std::size_t>(q)];
          if (dq < 0) continue;
          for (int a = 0; a < m; ++a) {
            const auto row = static_cast<Eigen::Index>(dp * m + a);
            mt.emplace_back(row, static_cast<Eigen::Index>(dq * m + a), em.mass(p, q));
            for (int b = 0; b < m; ++b) {
              const double v = ke(p * m + a, q * m + b);
              if (v != 0.0) kt.emplace_back(row, static_cast<Eigen::Index>(dq * m + b), v);
            }
          }
        }
      }
    }
  });

  std::vector<Eigen::Triplet<double>> kt, mt;
  for (auto& part : k_parts) kt.insert(kt.end(), part.begin(), part.end());
  for (auto& part : m_parts) mt.insert(mt.end(), part.begin(), part.end());
  const auto n = static_cast<Eigen::Index>(op.dimension);
  op.stiffness.resize(n, n);
  op.mass.resize(n, n);
  op.stiffness.setFromTriplets(kt.begin(), kt.end());
  op.mass.setFromTriplets(mt.begin(), mt.end());
  op.stiffness.makeCompressed();
  op.mass.makeCompressed();
  return op;
}

std::vector<std::int64_t> interior_node_map(const StructuredGrid& grid) {
  std::vector<std::int64_t> map(grid.num_nodes());
  for (std::size_t node = 0; node < map.size(); ++node) map[node] = grid.is_boundary_node(node) ? -1 : 0;
  return map;
}

std::vector<std::int64_t> all_node_map(const StructuredGrid& grid) {
  return std::vector<std::int64_t>(grid.num_nodes(), 0);
}

std::vector<std::int64_t> inclusion_interior_node_map(const StructuredGrid& grid) {
  if (!grid.tagged()) throw ValidationError("inclusion operator needs a region-tagged grid");
  const int d = grid.dim();
  std::vector<std::int64_t> map(grid.num_nodes(), -1);
  for (std::size_t node = 0; node < map.size(); ++node) {
    if (!grid.periodic() && grid.is_boundary_node(node)) continue;
    const MultiIndex idx = grid.node_multi_index(node);
    bool inside = true;
    for (int b = 0; b < (1 << d) && inside; ++b) {
      MultiIndex c = idx;
      for (int k = 0; k < d; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        c[ku] -= (b >> k) & 1;
        if (grid.periodic()) c[ku] = (c[ku] + grid.resolution(k)) % grid.resolution(k);
      }
      inside = grid.tag(grid.cell_index(c)) == Region::inclusion;
    }
    if (inside) map[node] = 0;
  }
  return map;
}

SparseSymmetricOperator assemble_fine_operator(const EpsilonDomain& domain, const CoefficientField& A,
                                               const ContrastWeight& w) {
  const StructuredGrid& grid = domain.grid;
  if (!grid.has_lattice() || !grid.tagged())
    throw ValidationError("fine operator needs an ε-domain grid that resolves the ε-cells");
  if (A.dim() != grid.dim()) throw ValidationError("coefficient dimension does not match the grid");
  const double delta = w.delta;
  return assemble_operator(
      grid, A.components(), Constraint::dirichlet, interior_node_map(grid),
      [&](std::size_t cell) {
        const double lambda = grid.tag(cell) == Region::inclusion ? delta : 1.0;
        return (lambda * A(grid.local_barycenter(cell))).eval();
      },
      std::vector<char>(grid.num_cells(), 1));
}

SparseSymmetricOperator assemble_cell_operator(const StructuredGrid& grid_y, const CoefficientField& A, double delta) {
  if (!grid_y.periodic() || !grid_y.tagged()) throw ValidationError("cell operator needs a tagged periodic grid on Y");
  if (!(delta > 0.0)) throw ValidationError("contrast delta must be positive");
  if (A.dim() != grid_y.dim()) throw ValidationError("coefficient dimension does not match the grid");
  return assemble_operator(
      grid_y, A.components(), Constraint::periodic_mean_zero, all_node_map(grid_y),
      [&](std::size_t cell) {
        const double lambda = grid_y.tag(cell) == Region::inclusion ? delta : 1.0;
        return (lambda * A(grid_y.cell_barycenter(cell))).eval();
      },
      std::vector<char>(grid_y.num_cells(), 1));
}

SparseSymmetricOperator assemble_inclusion_operator(const StructuredGrid& grid_y, const CoefficientField& A) {
  if (A.dim() != grid_y.dim()) throw ValidationError("coefficient dimension does not match the grid");
  auto map = inclusion_interior_node_map(grid_y);
  if (std::none_of(map.begin(), map.end(), [](std::int64_t v) { return v >= 0; }))
    throw ValidationError("inclusion has no interior grid nodes; refine the unit-cell resolution");
  std::vector<char> active(grid_y.num_cells());
  for (std::size_t c = 0; c < active.size(); ++c) active[c] = grid_y.tag(c) == Region::inclusion;
  return assemble_operator(
      grid_y, A.components(), Constraint::dirichlet, std::move(map),
      [&](std::size_t cell) { return A(grid_y.cell_barycenter(cell)); }, active);
}

SparseSymmetricOperator assemble_homogenized_operator(const StructuredGrid& grid_omega, const Eigen::MatrixXd& A_hat) {
  const int d = grid_omega.dim();
  if (A_hat.rows() != A_hat.cols() || A_hat.rows() % d != 0)
    throw ValidationError("homogenized tensor must be dm×dm");
  const double scale = std::max(1.0, A_hat.cwiseAbs().maxCoeff());
  if ((A_hat - A_hat.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw ValidationError("homogenized tensor is not symmetric");
  const Eigen::MatrixXd sym = 0.5 * (A_hat + A_hat.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0)) {
    std::ostringstream msg;
    msg << "homogenized tensor is not positive definite (smallest eigenvalue " << lmin << ")";
    throw ValidationError(msg.str());
  }
  return assemble_operator(
      grid_omega, static_cast<int>(A_hat.rows()) / d, Constraint::dirichlet, interior_node_map(grid_omega),
      [&](std::size_t) { return sym; }, std::vector<char>(grid_omega.num_cells(), 1));
}

Eigen::VectorXd shape_integrals(const StructuredGrid& grid, const SparseSymmetricOperator& op) {
  const double per_cell = element_matrices(grid).shape_integral;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.dimension));
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    for (auto node : grid.cell_nodes(c)) {
      if (node >= grid.num_nodes()) continue;
      const auto dof = op.node_to_dof[node];
      if (dof < 0) continue;
      for (int a = 0; a < op.components; ++a) w[dof * op.components + a] += per_cell;
    }
  }
  return w;
}

void export_matrix_market(const SparseSymmetricOperator& op, const std::string& prefix) {
  if (!Eigen::saveMarket(op.stiffness, prefix + "_K.mtx") || !Eigen::saveMarket(op.mass, prefix + "_M.mtx"))
    throw ValidationError("cannot write MatrixMarket files with prefix " + prefix);
}

}  // namespace homoglab
