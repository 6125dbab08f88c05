#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "homoglab/geometry.hpp"

namespace homoglab {

/// Commensurate two-scale discretization of Ω̂_ε × Y with Ω̂_ε = [0,1]^d.
///
/// Functions on Ω̂_ε are constant on the (n·M)^d fine cells; functions on
/// Ω̂_ε × Y are constant on products of a fine x-cell with one of the M^d
/// y-cells. With these spaces the unfolding operator is a re-indexing and the
/// averaging operator a finite sum, so every identity below is exact.
struct UnfoldingLayout {
  int dim = 0;
  int n = 0;         ///< ε = 1/n
  int subcells = 0;  ///< M: fine cells per ε-cell per axis, also y-cells per axis

  double epsilon() const { return 1.0 / n; }
  int fine_per_axis() const { return n * subcells; }
  std::size_t x_cells() const;
  std::size_t y_cells() const;
  std::size_t lattice_cells() const;
  double x_weight() const;  ///< fine x-cell volume
  double y_weight() const;  ///< y-cell volume

  /// Fine x-cell with ε-cell multi-index `cell` and local index `local`.
  std::size_t x_index(const MultiIndex& cell, const MultiIndex& local) const;
  /// Index in [0, M^d) with axis 0 fastest.
  std::size_t y_index(const MultiIndex& local) const;
  MultiIndex y_multi_index(std::size_t q) const;
  MultiIndex lattice_multi_index(std::size_t k) const;
  /// Fine x-cell barycenter and y-cell barycenter.
  Point x_center(std::size_t c) const;
  Point y_center(std::size_t q) const;
};

UnfoldingLayout make_unfolding_layout(int dim, int n, int subcells);
/// Layout matching an ε-domain grid; rejects grids whose resolution is not n·M.
UnfoldingLayout make_unfolding_layout(const StructuredGrid& grid);

/// Element of L²(Ω̂_ε × Y); value (c, q) at c·M^d + q.
struct TwoScaleGridFunction {
  UnfoldingLayout layout;
  Eigen::VectorXd values;

  double& at(std::size_t c, std::size_t q) { return values[static_cast<Eigen::Index>(c * layout.y_cells() + q)]; }
  double at(std::size_t c, std::size_t q) const {
    return values[static_cast<Eigen::Index>(c * layout.y_cells() + q)];
  }
  double norm() const;
};

TwoScaleGridFunction zero_two_scale(const UnfoldingLayout& layout);

/// T̃_ε u (x, y) = u(ε[x/ε] + εy).
TwoScaleGridFunction unfold(const UnfoldingLayout& layout, const Eigen::VectorXd& u);
/// Ũ_ε φ (x) = ∫_Y φ(ε[x/ε] + εz, {x/ε}) dz.
Eigen::VectorXd average(const TwoScaleGridFunction& phi);
/// P_ε = T̃_ε ∘ Ũ_ε: cell average in x, y untouched.
TwoScaleGridFunction project(const TwoScaleGridFunction& phi);
/// ⟨φ⟩_Y (x) = ∫_Y φ(x, y) dy.
Eigen::VectorXd y_mean(const TwoScaleGridFunction& phi);
/// ι u (x, y) = u(x).
TwoScaleGridFunction embed(const UnfoldingLayout& layout, const Eigen::VectorXd& u);
/// P_ε on L²(Ω̂_ε): replaces u by its ε-cell averages.
Eigen::VectorXd cell_project(const UnfoldingLayout& layout, const Eigen::VectorXd& u);

double l2_norm(const UnfoldingLayout& layout, const Eigen::VectorXd& u);
double l2_inner(const UnfoldingLayout& layout, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double l2_inner(const TwoScaleGridFunction& a, const TwoScaleGridFunction& b);

/// Fine-cell averages of f by tensor Gauss quadrature (3 points per axis).
Eigen::VectorXd cell_averages(const UnfoldingLayout& layout, const std::function<double(const Point&)>& f);
/// Exact cell averages of a nodal Q1 function on an ε-domain grid (mean of
/// the cell's corner values).
Eigen::VectorXd nodal_to_cell_averages(const StructuredGrid& grid, const Eigen::VectorXd& nodal);

/// Smooth function on [0,1]^d with its exact H¹ norm.
struct SmoothFunction {
  std::string label;
  std::function<double(const Point&)> value;
  double h1_norm = 0.0;
  bool vanishes_on_boundary = false;
};

/// Products ∏ sin(k_a π x_a) with 1 ≤ k_a ≤ max_frequency.
std::vector<SmoothFunction> sine_family(int dim, int max_frequency);
SmoothFunction constant_function(int dim, double c);

struct UnfoldingRateRow {
  double epsilon = 0.0;
  double r_a = 0.0;
  double r_b = 0.0;
  double r_c = 0.0;
};

struct UnfoldingRateReport {
  std::vector<UnfoldingRateRow> rows;
  /// Least-squares log-log slopes; empty when fewer than two positive values.
  std::optional<double> slope_a;
  std::optional<double> slope_b;
  std::optional<double> slope_c;
};

/// r_c = max ‖P_ε u − u‖/‖u‖_{H¹}, r_b = max ‖T̃_ε u − ι u‖/‖u‖_{H¹} over the
/// family; r_a = max ⟨(Ũ_ε − ⟨·⟩_Y)φ, v⟩/(‖φ‖ ‖v‖_{H¹}) over φ = f(x)g(y)
/// with f from the family, g ∈ {1, sin 2πy₁, cos 2πy₁ cos 2πy₂}, and v from
/// the members that vanish on ∂Ω. This lower-bounds the H⁻¹ operator norm.
UnfoldingRateReport estimate_norm_bounds(const std::vector<SmoothFunction>& family, const std::vector<int>& ns,
                                         int dim, int subcells);

/// Least-squares slope of log y against log x; empty when fewer than two
/// points have y > 0.
std::optional<double> fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

std::string unfolding_rates_csv(const UnfoldingRateReport& report);
nlohmann::json to_json(const UnfoldingRateReport& report);

}  // namespace homoglab
