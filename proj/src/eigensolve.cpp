#include "homoglab/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "homoglab/parallel.hpp"

namespace homoglab {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// M-orthogonal projection onto the complement of span(Z).
struct Deflator {
  MatrixXd z;
  MatrixXd mz;
  Eigen::LDLT<MatrixXd> gram;

  Deflator(const MatrixXd& basis, const SparseMatrix& M) : z(basis) {
    if (z.cols() > 0) {
      mz = M * z;
      gram.compute(z.transpose() * mz);
    }
  }
  bool active() const { return z.cols() > 0; }
  void apply(MatrixXd& x) const {
    if (active()) x -= z * gram.solve(mz.transpose() * x);
  }
};

Index available_dimension(const EigenRequest& req) { return req.stiffness.rows() - req.deflation.cols(); }

// SVQB M-orthonormalization; drops numerically dependent directions.
MatrixXd svqb(MatrixXd x, const SparseMatrix& M) {
  for (int pass = 0; pass < 3 && x.cols() > 0; ++pass) {
    const MatrixXd mx = M * x;
    MatrixXd g = x.transpose() * mx;
    g = 0.5 * (g + g.transpose());
    if (pass > 0 && (g - MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 1e-13) break;
    VectorXd d = g.diagonal();
    for (Index i = 0; i < d.size(); ++i) d[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
    const MatrixXd h = d.asDiagonal() * g * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    const VectorXd& th = es.eigenvalues();
    const double cut = 1e-14 * std::max(th.maxCoeff(), 1e-300);
    std::vector<Index> keep;
    for (Index i = 0; i < th.size(); ++i)
      if (th[i] > cut) keep.push_back(i);
    MatrixXd t(x.cols(), static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
      t.col(static_cast<Index>(c)) = d.asDiagonal() * es.eigenvectors().col(keep[c]) / std::sqrt(th[keep[c]]);
    x = x * t;
  }
  return x;
}

// Rayleigh-Ritz on an M-orthonormal basis; returns ascending Ritz values.
VectorXd rayleigh_ritz(MatrixXd& x, const SparseMatrix& K) {
  MatrixXd a = x.transpose() * (K * x);
  a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  x = x * es.eigenvectors();
  return es.eigenvalues();
}

VectorXd lumped_mass(const SparseMatrix& M) {
  VectorXd rows = M * VectorXd::Ones(M.cols());
  if (rows.minCoeff() > 0.0) return rows;
  return M.diagonal();
}

double residual_norm(const SparseMatrix& K, const SparseMatrix& M, const VectorXd& lumped, double lambda,
                     const VectorXd& x) {
  const VectorXd r = K * x - lambda * (M * x);
  const double rn = std::sqrt((r.array().square() / lumped.array()).sum());
  const double xn = std::sqrt(std::max(x.dot(M * x), 0.0));
  const double scale = std::max(std::abs(lambda), 1e-300) * std::max(xn, 1e-300);
  return rn / scale;
}

MatrixXd random_block(Index n, Index b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(n, b);
  for (Index j = 0; j < b; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  return x;
}

EigenResult finish(const EigenRequest& req, std::vector<double> values, MatrixXd vectors, int iterations,
                   EigenMethod method) {
  EigenResult out;
  // Ascending order.
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  out.values.resize(values.size());
  out.vectors.resize(vectors.rows(), static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.values[i] = values[order[i]];
    out.vectors.col(static_cast<Index>(i)) = vectors.col(static_cast<Index>(order[i]));
  }
  out.residuals = relative_residuals(req.stiffness, req.mass, out.values, out.vectors);
  out.iterations = iterations;
  out.method = method;
  out.converged = std::all_of(out.residuals.begin(), out.residuals.end(),
                              [&](double r) { return r <= req.tolerance; });
  if (!out.converged) {
    const double worst = *std::max_element(out.residuals.begin(), out.residuals.end());
    std::ostringstream msg;
    msg << to_string(method) << " eigensolver stopped after " << iterations << " iterations with worst residual "
        << worst << " above tolerance " << req.tolerance;
    out.note = msg.str();
  }
  return out;
}

// Picks the `count` Ritz pairs nearest sigma (or the smallest when unshifted).
std::vector<Index> select(const VectorXd& theta, Index count, std::optional<double> shift) {
  std::vector<Index> idx(static_cast<std::size_t>(theta.size()));
  std::iota(idx.begin(), idx.end(), 0);
  if (shift) {
    const double s = *shift;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return std::abs(theta[a] - s) < std::abs(theta[b] - s); });
  }
  idx.resize(static_cast<std::size_t>(std::min<Index>(count, theta.size())));
  return idx;
}

EigenResult shift_invert(const EigenRequest& req) {
  const SparseMatrix& K = req.stiffness;
  const SparseMatrix& M = req.mass;
  const Index n = K.rows();
  const Index k = req.count;
  const Index avail = available_dimension(req);
  const Index b = std::min<Index>(req.block_size > 0 ? req.block_size : std::max<Index>(2 * k, k + 8), avail);
  const int maxit = req.max_iterations > 0 ? req.max_iterations : 400;
  Deflator defl(req.deflation, M);
  const VectorXd lumped = lumped_mass(M);

  double sigma = 0.0;
  if (req.shift) {
    sigma = *req.shift;
  } else if (defl.active()) {
    const double ratio = K.diagonal().mean() / M.diagonal().mean();
    sigma = -1e-6 * ratio;
  }
  SparseMatrix A = K - sigma * M;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericalError("factorization of K - σM failed at σ = " + std::to_string(sigma));

  MatrixXd x = random_block(n, b, req.seed);
  defl.apply(x);
  x = svqb(std::move(x), M);
  VectorXd theta;
  int it = 0;
  std::vector<Index> chosen;
  for (; it < maxit;) {
    ++it;
    const MatrixXd mx = M * x;
    MatrixXd y(n, mx.cols());
    const auto cols = static_cast<std::size_t>(mx.cols());
    parallel_chunks(cols, std::min<std::size_t>(cols, 64), [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t c = lo; c < hi; ++c) y.col(static_cast<Index>(c)) = ldlt.solve(mx.col(static_cast<Index>(c)));
    });
    defl.apply(y);
    x = svqb(std::move(y), M);
    theta = rayleigh_ritz(x, K);
    chosen = select(theta, k, req.shift);
    bool done = true;
    for (Index c : chosen) {
      if (residual_norm(K, M, lumped, theta[c], x.col(c)) > req.tolerance) {
        done = false;
        break;
      }
    }
    if (done) break;
  }
  std::vector<double> vals;
  MatrixXd vecs(n, static_cast<Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    vals.push_back(theta[chosen[i]]);
    vecs.col(static_cast<Index>(i)) = x.col(chosen[i]);
  }
  return finish(req, std::move(vals), std::move(vecs), it, EigenMethod::shift_invert);
}

EigenResult lobpcg(const EigenRequest& req) {
  const SparseMatrix& K = req.stiffness;
  const SparseMatrix& M = req.mass;
  const Index n = K.rows();
  const Index k = req.count;
  const Index avail = available_dimension(req);
  const Index b = std::min<Index>(req.block_size > 0 ? req.block_size : std::max<Index>(2 * k, k + 8), avail / 3);
  if (b < k) throw ValidationError("LOBPCG needs a dimension of at least three times the block size");
  const int maxit = req.max_iterations > 0 ? req.max_iterations : 300;
  Deflator defl(req.deflation, M);
  const VectorXd lumped = lumped_mass(M);
  VectorXd inv_diag = K.diagonal();
  for (Index i = 0; i < n; ++i) inv_diag[i] = inv_diag[i] > 0.0 ? 1.0 / inv_diag[i] : 1.0;

  MatrixXd x = random_block(n, b, req.seed);
  defl.apply(x);
  x = svqb(std::move(x), M);
  if (x.cols() < b) throw NumericalError("LOBPCG starting block is rank deficient");
  VectorXd theta = rayleigh_ritz(x, K);
  MatrixXd p(n, 0);
  int it = 0;
  for (; it < maxit; ++it) {
    const MatrixXd r = K * x - (M * x) * theta.asDiagonal();
    bool done = true;
    for (Index c = 0; c < k && done; ++c)
      done = residual_norm(K, M, lumped, theta[c], x.col(c)) <= req.tolerance;
    if (done) break;
    MatrixXd w = inv_diag.asDiagonal() * r;
    defl.apply(w);
    const MatrixXd mx = M * x;
    w -= x * (mx.transpose() * w);
    if (p.cols() > 0) p -= x * (mx.transpose() * p);
    MatrixXd s(n, x.cols() + w.cols() + p.cols());
    s << x, w, p;
    s = svqb(std::move(s), M);
    if (s.cols() < b) break;
    const VectorXd all = rayleigh_ritz(s, K);
    MatrixXd xn = s.leftCols(b);
    p = xn - x * (mx.transpose() * xn);
    x = std::move(xn);
    theta = all.head(b);
  }
  std::vector<double> vals(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) vals[static_cast<std::size_t>(c)] = theta[c];
  return finish(req, std::move(vals), x.leftCols(k), it, EigenMethod::lobpcg);
}

EigenResult dense_request(const EigenRequest& req) {
  EigenResult full = dense_oracle_eigens(req.stiffness, req.mass, req.deflation);
  VectorXd theta = Eigen::Map<const VectorXd>(full.values.data(), static_cast<Index>(full.values.size()));
  const auto chosen = select(theta, req.count, req.shift);
  std::vector<double> vals;
  MatrixXd vecs(full.vectors.rows(), static_cast<Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    vals.push_back(theta[chosen[i]]);
    vecs.col(static_cast<Index>(i)) = full.vectors.col(chosen[i]);
  }
  EigenResult out = finish(req, std::move(vals), std::move(vecs), 1, EigenMethod::dense);
  // Direct solver: residuals are at round-off and carry no convergence meaning.
  out.converged = true;
  out.note.clear();
  return out;
}

}  // namespace

std::string to_string(EigenMethod m) {
  switch (m) {
    case EigenMethod::automatic: return "auto";
    case EigenMethod::lobpcg: return "lobpcg";
    case EigenMethod::shift_invert: return "shift_invert";
    case EigenMethod::dense: return "dense";
  }
  return "unknown";
}

EigenMethod parse_eigen_method(const std::string& name) {
  if (name == "auto" || name == "automatic") return EigenMethod::automatic;
  if (name == "lobpcg") return EigenMethod::lobpcg;
  if (name == "shift_invert" || name == "shift-invert") return EigenMethod::shift_invert;
  if (name == "dense") return EigenMethod::dense;
  throw ValidationError("unknown eigen method '" + name + "' (expected auto, lobpcg, shift_invert or dense)");
}

EigenRequest make_request(const SparseSymmetricOperator& op, int count, double tolerance) {
  EigenRequest req;
  req.stiffness = op.stiffness;
  req.mass = op.mass;
  req.deflation = op.deflation_basis();
  req.count = count;
  req.tolerance = tolerance;
  return req;
}

std::vector<EigenCluster> cluster_values(const std::vector<double>& values, double gap) {
  std::vector<EigenCluster> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!out.empty()) {
      const double prev = values[i - 1];
      const double scale = std::max(std::abs(prev), std::abs(values[i]));
      if (std::abs(values[i] - prev) <= gap * scale) {
        auto& c = out.back();
        c.value = (c.value * static_cast<double>(c.dimension) + values[i]) / static_cast<double>(c.dimension + 1);
        ++c.dimension;
        continue;
      }
    }
    out.push_back({values[i], i, 1});
  }
  return out;
}

std::vector<double> EigenResult::inverse_values() const {
  std::vector<double> inv;
  inv.reserve(values.size());
  for (double v : values) {
    if (v == 0.0) throw NumericalError("zero eigenvalue has no inverse");
    inv.push_back(1.0 / v);
  }
  std::sort(inv.begin(), inv.end(), std::greater<>());
  return inv;
}

const EigenResult& EigenResult::require_converged() const {
  if (!converged) throw NumericalError(note.empty() ? "eigensolver did not converge" : note);
  return *this;
}

std::vector<double> relative_residuals(const SparseMatrix& K, const SparseMatrix& M, const std::vector<double>& values,
                                       const Eigen::MatrixXd& vectors) {
  const VectorXd lumped = lumped_mass(M);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = residual_norm(K, M, lumped, values[i], vectors.col(static_cast<Index>(i)));
  return out;
}

EigenResult smallest_eigenpairs(const EigenRequest& req) {
  const Index n = req.stiffness.rows();
  if (req.stiffness.cols() != n || req.mass.rows() != n || req.mass.cols() != n)
    throw ValidationError("stiffness and mass must be square and of equal size");
  if (req.count < 1) throw ValidationError("eigen request count must be at least 1");
  if (!(req.tolerance > 0.0 && req.tolerance <= 1e-2)) throw ValidationError("eigen tolerance must lie in (0, 1e-2]");
  if (req.deflation.cols() > 0 && req.deflation.rows() != n) throw ValidationError("deflation basis has the wrong size");
  if (req.count > available_dimension(req)) throw ValidationError("more eigenpairs requested than the dimension allows");

  switch (req.method) {
    case EigenMethod::dense: return dense_request(req);
    case EigenMethod::shift_invert: return shift_invert(req);
    case EigenMethod::lobpcg: return lobpcg(req);
    case EigenMethod::automatic: break;
  }
  const Index avail = available_dimension(req);
  if (static_cast<std::size_t>(n) <= kDenseCap && 4 * req.count > avail) return dense_request(req);
  if (req.shift || 3 * std::max<Index>(2 * req.count, req.count + 8) > avail) return shift_invert(req);
  EigenResult first = lobpcg(req);
  if (first.converged) return first;
  EigenResult second = shift_invert(req);
  second.note = "lobpcg did not converge; shift-invert fallback" + (second.converged ? "" : ": " + second.note);
  return second;
}

EigenResult dense_oracle_eigens(const SparseMatrix& K, const SparseMatrix& M, const Eigen::MatrixXd& deflation) {
  const Index n = K.rows();
  if (static_cast<std::size_t>(n) > kDenseCap)
    throw ValidationError("dense oracle is capped at dimension " + std::to_string(kDenseCap) + ", got " +
                          std::to_string(n));
  const MatrixXd Kd = MatrixXd(K);
  const MatrixXd Md = MatrixXd(M);
  MatrixXd q;
  if (deflation.cols() > 0) {
    const MatrixXd mz = Md * deflation;
    Eigen::HouseholderQR<MatrixXd> qr(mz);
    const MatrixXd full = qr.householderQ();
    q = full.rightCols(n - deflation.cols());
  } else {
    q = MatrixXd::Identity(n, n);
  }
  MatrixXd kr = q.transpose() * Kd * q;
  MatrixXd mr = q.transpose() * Md * q;
  kr = 0.5 * (kr + kr.transpose());
  mr = 0.5 * (mr + mr.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(kr, mr);
  if (es.info() != Eigen::Success) throw NumericalError("dense generalized eigensolver failed (M not SPD?)");
  EigenResult out;
  out.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  out.vectors = q * es.eigenvectors();
  out.residuals = relative_residuals(K, M, out.values, out.vectors);
  out.iterations = 1;
  out.converged = true;
  out.method = EigenMethod::dense;
  return out;
}

EigenResult dense_oracle_eigens(const SparseSymmetricOperator& op) {
  return dense_oracle_eigens(op.stiffness, op.mass, op.deflation_basis());
}

std::size_t eigenvalue_count_below(const SparseMatrix& K, const SparseMatrix& M, double sigma) {
  // Without pivoting an exact zero pivot can appear away from any
  // eigenvalue; a relative nudge far below any bracket width resolves it.
  double s = sigma;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const SparseMatrix S = K - s * M;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(S);
    if (ldlt.info() == Eigen::Success) return static_cast<std::size_t>((ldlt.vectorD().array() < 0.0).count());
    s = sigma * (1.0 + 1e-12 * std::pow(4.0, attempt));
  }
  throw NumericalError("LDLT of K - σM failed at σ = " + std::to_string(sigma) + " (σ is an eigenvalue?)");
}

SpectrumCounter::SpectrumCounter(SparseMatrix K, SparseMatrix M) : K_(std::move(K)), M_(std::move(M)) {
  if (K_.rows() != M_.rows() || K_.rows() != K_.cols()) throw ValidationError("K and M must be square and of equal size");
  cache_[0.0] = eigenvalue_count_below(K_, M_, 0.0);
  if (cache_[0.0] != 0) throw ValidationError("SpectrumCounter needs a positive definite K");
}

std::size_t SpectrumCounter::below(double sigma) {
  if (sigma <= 0.0) return 0;
  const auto it = cache_.find(sigma);
  if (it != cache_.end()) return it->second;
  const auto c = eigenvalue_count_below(K_, M_, sigma);
  cache_.emplace(sigma, c);
  return c;
}

std::vector<double> SpectrumCounter::smallest(std::size_t first, std::size_t count, double rel_tol) {
  const auto n = static_cast<std::size_t>(K_.rows());
  if (first + count > n) throw ValidationError("requested eigenvalues beyond the dimension");
  std::vector<double> out;
  for (std::size_t i = first; i < first + count; ++i) {
    // Tightest cached bracket with N(lo) ≤ i < N(hi).
    double lo = 0.0, hi = 0.0;
    for (const auto& [sigma, c] : cache_) {
      if (c <= i) lo = sigma;
      if (c > i) {
        hi = sigma;
        break;
      }
    }
    if (hi == 0.0) {
      hi = std::max(1.0, 2.0 * lo);
      while (below(hi) <= i) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericalError("no upper bracket for eigenvalue " + std::to_string(i));
      }
    }
    while (hi - lo > rel_tol * hi) {
      const double mid = 0.5 * (lo + hi);
      (below(mid) <= i ? lo : hi) = mid;
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

SpectrumWindow nearest_eigenvalue_window(SpectrumCounter& counter, double target, std::size_t count, double rel_tol) {
  if (!(target > 0.0) || count == 0) throw ValidationError("window needs a positive target and count");
  auto inside = [&](double r) { return counter.below(target + r) - counter.below(target - r); };
  const double tol = rel_tol * target;
  double lo = 0.0, hi = 0.01 * target;
  while (inside(hi) < count) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6 * target) throw ValidationError("fewer than " + std::to_string(count) + " eigenvalues exist");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) >= count ? hi : lo) = mid;
  }
  SpectrumWindow w;
  w.target = target;
  w.radius = hi;
  w.members = inside(hi);
  const double a = target - hi, b = target + hi;
  const std::size_t base = counter.below(a), top = counter.below(b);
  // lowest: first σ with an eigenvalue in [a, σ).
  double l = a, u = b;
  while (u - l > tol) {
    const double mid = 0.5 * (l + u);
    (counter.below(mid) > base ? u : l) = mid;
  }
  w.lowest = 0.5 * (l + u);
  // highest: last σ with an eigenvalue in [σ, b).
  l = a;
  u = b;
  while (u - l > tol) {
    const double mid = 0.5 * (l + u);
    (counter.below(mid) < top ? l : u) = mid;
  }
  w.highest = 0.5 * (l + u);
  return w;
}

}  // namespace homoglab
