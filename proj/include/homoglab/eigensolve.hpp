#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "homoglab/fem.hpp"

namespace homoglab {

enum class EigenMethod { automatic, lobpcg, shift_invert, dense };

std::string to_string(EigenMethod m);
EigenMethod parse_eigen_method(const std::string& name);

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;
inline constexpr double kClusterGap = 1e-6;
inline constexpr std::size_t kDenseCap = 2000;

struct EigenRequest {
  SparseMatrix stiffness;
  SparseMatrix mass;
  /// Null-space vectors of K to exclude (M-orthogonality is enforced).
  Eigen::MatrixXd deflation;
  int count = 1;
  /// Relative residual ‖Ku − λMu‖/(|λ|‖u‖_M), residual measured in the
  /// lumped-mass inverse norm.
  double tolerance = 1e-8;
  /// With a shift, the `count` eigenvalues nearest to it are returned
  /// (shift-invert only); otherwise the smallest ones.
  std::optional<double> shift;
  EigenMethod method = EigenMethod::automatic;
  std::uint64_t seed = kDefaultSeed;
  int max_iterations = 0;  ///< 0 picks a method-specific cap
  int block_size = 0;      ///< 0 picks max(2k, k+8)
};

EigenRequest make_request(const SparseSymmetricOperator& op, int count, double tolerance = 1e-8);

struct EigenCluster {
  double value = 0.0;      ///< mean of the member values
  std::size_t first = 0;   ///< index of the first member
  std::size_t dimension = 0;
};

/// Groups ascending values whose consecutive relative gap is at most `gap`.
std::vector<EigenCluster> cluster_values(const std::vector<double>& values, double gap = kClusterGap);

struct EigenResult {
  std::vector<double> values;  ///< ascending
  Eigen::MatrixXd vectors;     ///< M-orthonormal columns
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  EigenMethod method = EigenMethod::automatic;
  std::string note;  ///< fallback or non-convergence explanation

  std::vector<EigenCluster> clusters(double gap = kClusterGap) const { return cluster_values(values, gap); }
  /// Eigenvalues of the inverse operator, 1/λ, in decreasing order.
  std::vector<double> inverse_values() const;
  /// Throws NumericalError carrying `note` unless converged.
  const EigenResult& require_converged() const;
};

/// Smallest (or shift-nearest) eigenpairs. Automatic mode runs LOBPCG with a
/// Jacobi preconditioner and falls back to shift-invert subspace iteration
/// when LOBPCG stalls; problems at or below the dense cap with count above
/// a quarter of the dimension go to the dense solver. A non-converged result
/// comes back with converged = false.
EigenResult smallest_eigenpairs(const EigenRequest& req);

/// Full dense decomposition on the M-orthogonal complement of the deflation
/// space. Rejects dimensions above kDenseCap.
EigenResult dense_oracle_eigens(const SparseMatrix& K, const SparseMatrix& M,
                                const Eigen::MatrixXd& deflation = Eigen::MatrixXd());
EigenResult dense_oracle_eigens(const SparseSymmetricOperator& op);

/// Number of eigenvalues of Ku = λMu strictly below σ, from the inertia of
/// an LDLᵀ factorization of K − σM (Sylvester's law of inertia).
std::size_t eigenvalue_count_below(const SparseMatrix& K, const SparseMatrix& M, double sigma);

/// Memoized counting function σ ↦ #{λ < σ} with bisection helpers. Robust
/// inside tight clusters where iterative solvers stall. K must be positive
/// definite.
class SpectrumCounter {
 public:
  SpectrumCounter(SparseMatrix K, SparseMatrix M);

  std::size_t below(double sigma);
  /// λ_first, ..., λ_{first+count−1} (0-based, ascending) to relative
  /// bracket width rel_tol.
  std::vector<double> smallest(std::size_t first, std::size_t count, double rel_tol = 1e-10);
  /// Number of factorizations so far.
  std::size_t evaluations() const { return cache_.size(); }

 private:
  SparseMatrix K_;
  SparseMatrix M_;
  std::map<double, std::size_t> cache_;
};

/// Window [target − radius, target + radius] of least radius (to
/// rel_tol·target) holding at least `count` eigenvalues; lowest and highest
/// are the extreme eigenvalues inside it.
struct SpectrumWindow {
  double target = 0.0;
  double radius = 0.0;
  double lowest = 0.0;
  double highest = 0.0;
  std::size_t members = 0;
};

SpectrumWindow nearest_eigenvalue_window(SpectrumCounter& counter, double target, std::size_t count,
                                         double rel_tol = 1e-9);

/// Per-column relative residuals in the lumped-mass inverse norm.
std::vector<double> relative_residuals(const SparseMatrix& K, const SparseMatrix& M, const std::vector<double>& values,
                                       const Eigen::MatrixXd& vectors);

}  // namespace homoglab
