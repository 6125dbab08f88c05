#include "homoglab/linear_solve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseCholesky>

#include "homoglab/errors.hpp"

namespace homoglab {
namespace {

struct Projector {
  Eigen::MatrixXd q;  // orthonormal basis of the null space
  void apply(Eigen::VectorXd& v) const {
    if (q.cols() > 0) v -= q * (q.transpose() * v);
  }
};

Eigen::VectorXd pcg(const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& inv_diag, const Projector& proj,
                    Eigen::VectorXd b, const LinearOptions& opt, int& iterations, double& rel) {
  proj.apply(b);
  const double bnorm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  iterations = 0;
  if (bnorm == 0.0) {
    rel = 0.0;
    return x;
  }
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  proj.apply(z);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  rel = 1.0;
  while (iterations < opt.max_iterations) {
    const Eigen::VectorXd kp = K * p;
    const double pkp = p.dot(kp);
    if (!(pkp > 0.0)) break;
    const double alpha = rz / pkp;
    x += alpha * p;
    r -= alpha * kp;
    ++iterations;
    rel = r.norm() / bnorm;
    if (rel <= opt.tolerance) break;
    z = inv_diag.cwiseProduct(r);
    proj.apply(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  // Recompute the true residual; the recursive one drifts.
  Eigen::VectorXd res = b - K * x;
  proj.apply(res);
  rel = res.norm() / bnorm;
  proj.apply(x);
  return x;
}

}  // namespace

Eigen::MatrixXd solve_spd(const Eigen::SparseMatrix<double>& K, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& null_space, const LinearOptions& options, LinearReport* report) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || B.rows() != n) throw ValidationError("linear system dimensions do not match");
  if (null_space.cols() > 0 && null_space.rows() != n) throw ValidationError("null-space basis has the wrong size");
  Projector proj;
  if (null_space.cols() > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(null_space);
    proj.q = qr.householderQ() * Eigen::MatrixXd::Identity(n, null_space.cols());
  }
  LinearReport rep;
  Eigen::MatrixXd X(n, B.cols());

  if (options.method == LinearMethod::direct) {
    // Pin the dof with the largest weight in each null vector.
    std::vector<char> pinned(static_cast<std::size_t>(n), 0);
    for (Eigen::Index c = 0; c < null_space.cols(); ++c) {
      Eigen::Index best = 0;
      double w = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!pinned[static_cast<std::size_t>(i)] && std::abs(null_space(i, c)) > w) {
          w = std::abs(null_space(i, c));
          best = i;
        }
      }
      pinned[static_cast<std::size_t>(best)] = 1;
    }
    std::vector<Eigen::Index> keep;
    std::vector<Eigen::Index> pos(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) {
        pos[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(keep.size());
        keep.push_back(i);
      }
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index col = 0; col < K.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it) {
        const auto r = pos[static_cast<std::size_t>(it.row())];
        const auto c = pos[static_cast<std::size_t>(it.col())];
        if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
      }
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::SparseMatrix<double> Kr(m, m);
    Kr.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Kr);
    if (ldlt.info() != Eigen::Success) throw NumericalError("sparse LDLT factorization failed");
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
      Eigen::VectorXd b = B.col(j);
      proj.apply(b);
      Eigen::VectorXd br(m);
      for (Eigen::Index i = 0; i < m; ++i) br[i] = b[keep[static_cast<std::size_t>(i)]];
      const Eigen::VectorXd xr = ldlt.solve(br);
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < m; ++i) x[keep[static_cast<std::size_t>(i)]] = xr[i];
      proj.apply(x);
      const double bn = b.norm();
      Eigen::VectorXd res = b - K * x;
      proj.apply(res);
      rep.relative_residual = std::max(rep.relative_residual, bn > 0.0 ? res.norm() / bn : 0.0);
      X.col(j) = x;
    }
  } else {
    Eigen::VectorXd inv_diag = K.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) inv_diag[i] = inv_diag[i] > 0.0 ? 1.0 / inv_diag[i] : 1.0;
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
      int it = 0;
      double rel = 0.0;
      X.col(j) = pcg(K, inv_diag, proj, B.col(j), options, it, rel);
      rep.iterations += it;
      rep.relative_residual = std::max(rep.relative_residual, rel);
      if (!(rel <= 10.0 * options.tolerance)) {
        rep.converged = false;
        if (report) *report = rep;
        throw NumericalError("conjugate gradients did not converge (relative residual " + std::to_string(rel) +
                             " after " + std::to_string(it) + " iterations)");
      }
    }
  }
  if (report) *report = rep;
  return X;
}

}  // namespace homoglab
