#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "homoglab/geometry.hpp"

namespace homoglab {

enum class CoefficientKind { identity, layered, checkerboard, block_diagonal, sampled, custom };

std::string to_string(CoefficientKind kind);

/// Periodic coefficient tensor A(y) = (a_ij^{αβ}(y)).
///
/// Values are dm×dm matrices with row index α·d + i and column index β·d + j,
/// so the bilinear form is ∫ a_ij^{αβ} ∂_j u^β ∂_i v^α and the symmetry
/// condition a_ij^{αβ} = a_ji^{βα} is plain matrix symmetry. The evaluator
/// only ever sees the fractional part of its argument.
class CoefficientField {
 public:
  using Evaluator = std::function<Eigen::MatrixXd(const Point& y)>;

  CoefficientField(int dim, int components, Evaluator eval, double nu, CoefficientKind kind,
                   double holder_exponent = 1.0);

  static CoefficientField identity(int dim, int components = 1);
  /// Scalar a(y_axis) equal to `low` on [0,1/2) and `high` on [1/2,1). A
  /// positive smoothing width replaces the jumps by tanh(sin(2πt)/width) ramps.
  static CoefficientField layered(int dim, double low, double high, double smoothing = 0.0, int axis = 0);
  static CoefficientField checkerboard(int dim, double low, double high, double smoothing);
  /// m = scales.size() uncoupled components, component α scaled by scales[α].
  static CoefficientField block_diagonal(int dim, const std::vector<double>& scales);
  /// Multilinear periodic interpolation of nodal samples on a regular lattice
  /// with `points_per_axis` points per axis (node k at y = k/points).
  static CoefficientField from_samples(int dim, int components, int points_per_axis,
                                       std::vector<Eigen::MatrixXd> samples, double holder_exponent);

  Eigen::MatrixXd operator()(Point y) const;

  int dim() const { return dim_; }
  int components() const { return components_; }
  int block_size() const { return dim_ * components_; }
  double nu() const { return nu_; }
  CoefficientKind kind() const { return kind_; }
  double holder_exponent() const { return holder_exponent_; }

  CoefficientField scaled(double s) const;

 private:
  int dim_;
  int components_;
  Evaluator eval_;
  double nu_;
  CoefficientKind kind_;
  double holder_exponent_;
};

/// Reads a coefficient from CSV rows `y_1,...,y_d,a_00,a_01,...` (row-major
/// dm×dm entries); the y values must form a full regular lattice on [0,1).
/// Lines starting with '#' are skipped.
CoefficientField load_coefficient_csv(const std::string& path, int dim, int components, double holder_exponent);

struct ValidationReport {
  int samples = 0;
  double symmetry_defect = 0.0;   ///< max |a - aᵀ| over samples
  double ellipticity_lower = 0.0; ///< min Rayleigh quotient a ξ·ξ / |ξ|²
  double ellipticity_upper = 0.0; ///< max Rayleigh quotient
  double nu = 0.0;                ///< declared ellipticity constant
  double holder_exponent = 1.0;
  double holder_quotient = 0.0;   ///< sup |A(y)-A(w)| / |y-w|^λ over sampled pairs
  bool symmetric = false;
  bool elliptic = false;
  bool passed = false;
};

/// Samples A on a `samples`^d lattice of cell centres and checks symmetry and
/// ellipticity against the declared ν using `directions` random ξ per point
/// plus the coordinate directions. Non-finite entries raise ValidationError
/// naming the sample point.
ValidationReport validate_structure(const CoefficientField& field, int samples, int directions,
                                    std::optional<double> holder_exponent = std::nullopt,
                                    std::uint64_t seed = 0x5EED);

/// Contrast weight Λ: δ on inclusions, 1 on the matrix.
struct ContrastWeight {
  double delta = 1.0;
  std::optional<double> epsilon;

  ContrastWeight() = default;
  explicit ContrastWeight(double delta, std::optional<double> epsilon = std::nullopt);

  /// κ = ε²/δ; requires a bound ε.
  double kappa() const;
};

std::vector<double> contrast_weight_values(const ContrastWeight& w, const StructuredGrid& grid);

}  // namespace homoglab
