#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "homoglab/coefficients.hpp"
#include "homoglab/eigensolve.hpp"
#include "homoglab/geometry.hpp"
#include "homoglab/inclusion_spectrum.hpp"

namespace homoglab {

/// β_κ(λ) = λ Σ c_i/(1 − κβ_iλ) + (1 − θ)λ over the nonzero-mean branch.
///
/// Modes beyond the computed window enter through `tail_mass` with β in
/// [0, tail_beta_max]. For a complete discrete spectrum tail_beta_max is 0:
/// the remainder θ − wᵀM⁻¹w of the discrete model is annihilated by the
/// discrete inverse and contributes with factor exactly 1, and the last pole
/// interval is unbounded.
struct BetaFunction {
  double kappa = 0.0;
  double theta = 0.0;
  std::vector<double> betas;    ///< strictly decreasing
  std::vector<double> weights;  ///< c_i
  double tail_mass = 0.0;       ///< θ − Σ c_i
  double tail_beta_max = 0.0;
  bool complete = false;
  /// Largest λ accepted by beta_eval: 0.9 × the window edge μ_last/κ, or
  /// +∞ for a complete spectrum.
  double window_cap = std::numeric_limits<double>::infinity();

  std::size_t pole_count() const { return betas.size(); }
  /// p_0 = 0 and p_i = (κβ_i)⁻¹ for i ≥ 1.
  double pole(std::size_t i) const;
};

BetaFunction make_beta_function(const InclusionSpectrum& spec, double kappa);

struct BetaValue {
  double value = 0.0;  ///< tail evaluated with factor 1
  double lower = 0.0;  ///< certified enclosure over admissible tail β
  double upper = 0.0;
};

/// Rejects λ within 1e-10 (relative) of a pole and λ above the window cap.
BetaValue beta_eval(const BetaFunction& bf, double lambda);
/// dβ/dλ of the point value.
double beta_derivative(const BetaFunction& bf, double lambda);

/// γ_κ(λ) = −∫_Y (κ L_{ω,y}⁻¹ − λ)⁻¹[1] by one dense resolvent solve on the
/// periodic Q1 space of Y, with L_{ω,y}⁻¹ the Galerkin inverse on the
/// inclusion dofs. Independent of any eigen-expansion.
class ResolventOracle {
 public:
  ResolventOracle(const StructuredGrid& grid_y, const CoefficientField& A);
  /// Throws NumericalError when λ lies within 1e-10·max(1,|λ|) of an
  /// eigenvalue of κL⁻¹ (including 0), reporting the distance.
  double gamma(double kappa, double lambda) const;
  /// Eigenvalues 1/μ_i of the discrete L_{ω,y}⁻¹ restricted to ω.
  const std::vector<double>& inverse_eigenvalues() const { return inverse_values_; }

 private:
  Eigen::MatrixXd mass_;        // M_Y
  Eigen::MatrixXd inverse_;     // M_Y E K_ω⁻¹ Eᵀ M_Y
  Eigen::VectorXd weights_;     // M_Y 1
  std::vector<double> inverse_values_;
};

double gamma_eval_oracle(double kappa, double lambda, const StructuredGrid& grid_y, const CoefficientField& A);

struct ResidualRoot {
  std::size_t interval = 0;  ///< i: root lies in (p_i, p_{i+1})
  std::size_t j = 0;         ///< index into thetas
  double theta_j = 0.0;
  double lambda = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double residual = 0.0;     ///< |β_κ(λ) − θ_j|
  /// ε(1 + λ/θ_j): the untracked-constant defect scale of the root as an
  /// eigenvalue of the ε-dependent limit operator.
  double defect_bound = 0.0;
};

/// Roots of β_κ(λ) = θ_j on intervals i = 0..intervals−1 by bisection.
/// Incomplete spectra need intervals + 1 ≤ pole_count() and every interval
/// inside the window; complete spectra also admit the unbounded interval
/// i = pole_count(). The pole margin starts at 1e-6 of the interval width and
/// shrinks to 1e-8 before a NumericalError is raised.
std::vector<ResidualRoot> residual_roots(const BetaFunction& bf, const std::vector<double>& thetas,
                                         std::size_t intervals, double epsilon);

/// Number of intervals residual_roots accepts for this β.
std::size_t admissible_intervals(const BetaFunction& bf);

enum class EtaBranch { bloch, residual };
std::string to_string(EtaBranch b);

struct EtaEntry {
  double value = 0.0;
  std::size_t multiplicity = 1;
  EtaBranch branch = EtaBranch::bloch;
  std::size_t index = 0;  ///< Bloch: position in the Bloch list; residual: position in the root table
};

struct LimitSpectrumReport {
  std::vector<BlochValue> bloch;
  std::vector<ResidualRoot> residual;
  std::vector<EtaEntry> eta;  ///< decreasing

  /// eta with every entry repeated by its multiplicity.
  std::vector<double> expanded(std::size_t limit = std::numeric_limits<std::size_t>::max()) const;
};

/// Merges Bloch values and 1/λ_{i,j} into a decreasing list.
LimitSpectrumReport limit_eta(const std::vector<BlochValue>& bloch, const std::vector<ResidualRoot>& roots);

/// Columns branch,i,j,value,bracket_lo,bracket_hi,residual,theorem3_defect_bound.
std::string limit_spectrum_csv(const LimitSpectrumReport& report);

/// L̂_δ⁻¹ compressed onto x-functions constant on each ε-cell: G = BᵀK̂⁻¹B
/// with B the Q1 loads of the orthonormal cell indicators on an ε-domain
/// grid. thetas = 1/eig(G), ascending.
struct CompressedHomogenized {
  Eigen::MatrixXd G;
  std::vector<double> thetas;
};

CompressedHomogenized compress_homogenized_inverse(const EpsilonDomain& domain, const Eigen::MatrixXd& A_hat);

/// Dense two-scale limit operator L̂_δ⁻¹1_Ω⟨·⟩_Y + κP_εL_{ω,y}⁻¹ on
/// (ε-cell constants) ⊗ (periodic Q1 on Y); with this x-space P_ε is the
/// identity. Returns the full ascending spectrum with (I⊗M_Y)-orthonormal
/// vectors ordered ε-cell-major. Rejects dimensions above kDenseCap.
EigenResult two_scale_dense_oracle(const CompressedHomogenized& g, const StructuredGrid& grid_y,
                                   const CoefficientField& A, double kappa);

/// ∫_Y of each ε-cell block of an oracle eigenvector.
Eigen::VectorXd oracle_block_means(const Eigen::VectorXd& v, const StructuredGrid& grid_y, std::size_t cells);

}  // namespace homoglab
