#include "homoglab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

namespace homoglab {
namespace {

double wrap(double t) {
  const double f = t - std::floor(t);
  return f >= 1.0 ? 0.0 : f;
}

double periodic_distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    double d = std::abs(a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]);
    d = std::min(d, 1.0 - d);
    s += d * d;
  }
  return std::sqrt(s);
}

// 0 on [0,1/2), 1 on [1/2,1), ramped when width > 0.
double step_profile(double t, double width) {
  if (width <= 0.0) return t < 0.5 ? 0.0 : 1.0;
  return 0.5 * (1.0 - std::tanh(std::sin(2.0 * std::numbers::pi * t) / width));
}

}  // namespace

std::string to_string(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::identity: return "identity";
    case CoefficientKind::layered: return "layered";
    case CoefficientKind::checkerboard: return "checkerboard";
    case CoefficientKind::block_diagonal: return "block_diagonal";
    case CoefficientKind::sampled: return "sampled";
    case CoefficientKind::custom: return "custom";
  }
  return "unknown";
}

CoefficientField::CoefficientField(int dim, int components, Evaluator eval, double nu, CoefficientKind kind,
                                   double holder_exponent)
    : dim_(dim), components_(components), eval_(std::move(eval)), nu_(nu), kind_(kind),
      holder_exponent_(holder_exponent) {
  if (dim < 1 || dim > kMaxDim) throw ValidationError("coefficient dimension must be 1, 2 or 3");
  if (components < 1) throw ValidationError("system size m must be positive");
  if (!(nu > 0.0 && nu <= 1.0)) throw ValidationError("ellipticity constant must lie in (0,1]");
  if (!(holder_exponent > 0.0 && holder_exponent <= 1.0)) throw ValidationError("Hölder exponent must lie in (0,1]");
  if (!eval_) throw ValidationError("coefficient evaluator is empty");
}

CoefficientField CoefficientField::identity(int dim, int components) {
  const int n = dim * components;
  return {dim, components, [n](const Point&) { return Eigen::MatrixXd::Identity(n, n).eval(); }, 1.0,
          CoefficientKind::identity};
}

CoefficientField CoefficientField::layered(int dim, double low, double high, double smoothing, int axis) {
  if (!(low > 0.0 && high > 0.0)) throw ValidationError("layer values must be positive");
  if (axis < 0 || axis >= dim) throw ValidationError("layer axis out of range");
  const double nu = std::min({1.0, std::min(low, high), 1.0 / std::max(low, high)});
  return {dim, 1,
          [=](const Point& y) {
            const double s = step_profile(y[static_cast<std::size_t>(axis)], smoothing);
            return (Eigen::MatrixXd::Identity(dim, dim) * (low + (high - low) * s)).eval();
          },
          nu, CoefficientKind::layered};
}

CoefficientField CoefficientField::checkerboard(int dim, double low, double high, double smoothing) {
  if (!(low > 0.0 && high > 0.0)) throw ValidationError("checkerboard values must be positive");
  if (!(smoothing > 0.0)) throw ValidationError("checkerboard needs a positive smoothing width");
  const double nu = std::min({1.0, std::min(low, high), 1.0 / std::max(low, high)});
  return {dim, 1,
          [=](const Point& y) {
            double p = 1.0;
            for (int k = 0; k < dim; ++k) p *= std::sin(2.0 * std::numbers::pi * y[static_cast<std::size_t>(k)]);
            const double s = 0.5 * (1.0 - std::tanh(p / smoothing));
            return (Eigen::MatrixXd::Identity(dim, dim) * (low + (high - low) * s)).eval();
          },
          nu, CoefficientKind::checkerboard};
}

CoefficientField CoefficientField::block_diagonal(int dim, const std::vector<double>& scales) {
  if (scales.empty()) throw ValidationError("block_diagonal needs at least one component");
  double lo = 1.0;
  for (double s : scales) {
    if (!(s > 0.0)) throw ValidationError("component scales must be positive");
    lo = std::min({lo, s, 1.0 / s});
  }
  const int m = static_cast<int>(scales.size());
  return {dim, m,
          [=](const Point&) {
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim * m, dim * m);
            for (int alpha = 0; alpha < m; ++alpha) {
              a.block(alpha * dim, alpha * dim, dim, dim) =
                  Eigen::MatrixXd::Identity(dim, dim) * scales[static_cast<std::size_t>(alpha)];
            }
            return a;
          },
          lo, CoefficientKind::block_diagonal};
}

CoefficientField CoefficientField::from_samples(int dim, int components, int points_per_axis,
                                                std::vector<Eigen::MatrixXd> samples, double holder_exponent) {
  if (points_per_axis < 2) throw ValidationError("sampled coefficient needs at least 2 points per axis");
  std::size_t expected = 1;
  for (int k = 0; k < dim; ++k) expected *= static_cast<std::size_t>(points_per_axis);
  if (samples.size() != expected) throw ValidationError("sample count does not match the lattice size");
  const int n = dim * components;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& s : samples) {
    if (s.rows() != n || s.cols() != n) throw ValidationError("sample matrix has the wrong shape");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  if (!(lo > 0.0)) throw ValidationError("sampled coefficient is not positive definite");
  const double nu = std::min({1.0, lo, 1.0 / hi});
  auto data = std::make_shared<std::vector<Eigen::MatrixXd>>(std::move(samples));
  return {dim, components,
          [dim, n, points_per_axis, data](const Point& y) {
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
            std::array<int, kMaxDim> base{};
            std::array<double, kMaxDim> frac{};
            for (int k = 0; k < dim; ++k) {
              const double t = y[static_cast<std::size_t>(k)] * points_per_axis;
              const double fl = std::floor(t);
              base[static_cast<std::size_t>(k)] = static_cast<int>(fl) % points_per_axis;
              frac[static_cast<std::size_t>(k)] = t - fl;
            }
            for (int corner = 0; corner < (1 << dim); ++corner) {
              double w = 1.0;
              std::size_t idx = 0;
              for (int k = dim - 1; k >= 0; --k) {
                const int bit = (corner >> k) & 1;
                const auto ku = static_cast<std::size_t>(k);
                w *= bit ? frac[ku] : 1.0 - frac[ku];
                idx = idx * static_cast<std::size_t>(points_per_axis) +
                      static_cast<std::size_t>((base[ku] + bit) % points_per_axis);
              }
              if (w != 0.0) out += w * (*data)[idx];
            }
            return out;
          },
          nu, CoefficientKind::sampled, holder_exponent};
}

Eigen::MatrixXd CoefficientField::operator()(Point y) const {
  for (int k = 0; k < dim_; ++k) y[static_cast<std::size_t>(k)] = wrap(y[static_cast<std::size_t>(k)]);
  return eval_(y);
}

CoefficientField CoefficientField::scaled(double s) const {
  if (!(s > 0.0)) throw ValidationError("coefficient scale must be positive");
  auto inner = eval_;
  const double nu = std::min({1.0, nu_ * s, nu_ / s});
  return {dim_, components_, [inner, s](const Point& y) { return (s * inner(y)).eval(); }, nu, kind_,
          holder_exponent_};
}

CoefficientField load_coefficient_csv(const std::string& path, int dim, int components, double holder_exponent) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open coefficient file " + path);
  const int n = dim * components;
  std::map<std::vector<long long>, Eigen::MatrixXd> rows;
  std::vector<std::vector<double>> coords(static_cast<std::size_t>(dim));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<double> vals;
    double v = 0.0;
    while (ss >> v) vals.push_back(v);
    if (vals.size() != static_cast<std::size_t>(dim + n * n)) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim + n * n) +
                            " columns");
    }
    std::vector<long long> key;
    for (int k = 0; k < dim; ++k) key.push_back(std::llround(vals[static_cast<std::size_t>(k)] * 1e9));
    Eigen::MatrixXd a(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a(r, c) = vals[static_cast<std::size_t>(dim + r * n + c)];
    rows[key] = a;
    for (int k = 0; k < dim; ++k) coords[static_cast<std::size_t>(k)].push_back(vals[static_cast<std::size_t>(k)]);
  }
  std::size_t points = 0;
  for (auto& c : coords) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), c.end());
    if (points == 0) points = c.size();
    if (c.size() != points) throw ValidationError(path + ": sample lattice must have the same size on every axis");
  }
  std::size_t total = 1;
  for (int k = 0; k < dim; ++k) total *= points;
  if (rows.size() != total) throw ValidationError(path + ": samples do not form a full lattice");
  std::vector<Eigen::MatrixXd> samples(total);
  for (std::size_t s = 0; s < total; ++s) {
    std::vector<long long> key;
    std::size_t rest = s;
    for (int k = 0; k < dim; ++k) {
      const double y = static_cast<double>(rest % points) / static_cast<double>(points);
      rest /= points;
      key.push_back(std::llround(y * 1e9));
    }
    auto it = rows.find(key);
    if (it == rows.end()) throw ValidationError(path + ": samples must sit at y = k/N for a regular lattice");
    samples[s] = it->second;
  }
  return CoefficientField::from_samples(dim, components, static_cast<int>(points), std::move(samples),
                                        holder_exponent);
}

ValidationReport validate_structure(const CoefficientField& field, int samples, int directions,
                                    std::optional<double> holder_exponent, std::uint64_t seed) {
  if (samples < 1) throw ValidationError("validate_structure needs samples >= 1");
  if (directions < 0) throw ValidationError("directions must be non-negative");
  const int dim = field.dim();
  const int n = field.block_size();
  ValidationReport rep;
  rep.nu = field.nu();
  rep.holder_exponent = holder_exponent.value_or(field.holder_exponent());
  rep.ellipticity_lower = std::numeric_limits<double>::infinity();
  rep.ellipticity_upper = 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> xis;
  for (int k = 0; k < n; ++k) xis.push_back(Eigen::VectorXd::Unit(n, k));
  for (int r = 0; r < directions; ++r) {
    Eigen::VectorXd xi(n);
    for (int k = 0; k < n; ++k) xi[k] = normal(rng);
    xis.push_back(xi);
  }

  std::size_t total = 1;
  for (int k = 0; k < dim; ++k) total *= static_cast<std::size_t>(samples);
  rep.samples = static_cast<int>(total);
  std::vector<Point> points(total);
  std::vector<Eigen::MatrixXd> values(total);
  double scale = 0.0;
  for (std::size_t s = 0; s < total; ++s) {
    Point y{0.0, 0.0, 0.0};
    std::size_t rest = s;
    for (int k = 0; k < dim; ++k) {
      y[static_cast<std::size_t>(k)] = (static_cast<double>(rest % samples) + 0.5) / samples;
      rest /= static_cast<std::size_t>(samples);
    }
    Eigen::MatrixXd a = field(y);
    if (a.rows() != n || a.cols() != n || !a.allFinite()) {
      std::ostringstream msg;
      msg << "coefficient evaluator returned a non-finite or mis-shaped value at y = (";
      for (int k = 0; k < dim; ++k) msg << (k ? ", " : "") << y[static_cast<std::size_t>(k)];
      msg << ")";
      throw ValidationError(msg.str());
    }
    scale = std::max(scale, a.cwiseAbs().maxCoeff());
    rep.symmetry_defect = std::max(rep.symmetry_defect, (a - a.transpose()).cwiseAbs().maxCoeff());
    for (const auto& xi : xis) {
      const double q = xi.dot(a * xi) / xi.squaredNorm();
      rep.ellipticity_lower = std::min(rep.ellipticity_lower, q);
      rep.ellipticity_upper = std::max(rep.ellipticity_upper, q);
    }
    points[s] = y;
    values[s] = std::move(a);
  }

  // Hölder quotient over lattice neighbours plus random pairs.
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  auto quotient = [&](std::size_t i, std::size_t j) {
    const double d = periodic_distance(points[i], points[j], dim);
    if (d <= 0.0) return;
    rep.holder_quotient =
        std::max(rep.holder_quotient, (values[i] - values[j]).norm() / std::pow(d, rep.holder_exponent));
  };
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t stride = 1;
    for (int k = 0; k < dim; ++k) {
      const std::size_t coord = (s / stride) % static_cast<std::size_t>(samples);
      const std::size_t next = coord + 1 == static_cast<std::size_t>(samples) ? s - coord * stride : s + stride;
      quotient(s, next);
      stride *= static_cast<std::size_t>(samples);
    }
  }
  for (std::size_t r = 0; r < total; ++r) quotient(pick(rng), pick(rng));

  const double slack = 1e-12 * std::max(1.0, scale);
  rep.symmetric = rep.symmetry_defect < 1e-14 * std::max(1.0, scale);
  rep.elliptic = rep.ellipticity_lower >= rep.nu - slack && rep.ellipticity_upper <= 1.0 / rep.nu + slack;
  rep.passed = rep.symmetric && rep.elliptic;
  return rep;
}

ContrastWeight::ContrastWeight(double d, std::optional<double> eps) : delta(d), epsilon(eps) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ValidationError("contrast delta must be positive and finite");
  if (epsilon && !(*epsilon > 0.0 && *epsilon < 1.0)) throw ValidationError("epsilon must lie in (0,1)");
}

double ContrastWeight::kappa() const {
  if (!epsilon) throw ValidationError("kappa requires a bound epsilon");
  return (*epsilon) * (*epsilon) / delta;
}

std::vector<double> contrast_weight_values(const ContrastWeight& w, const StructuredGrid& grid) {
  if (!grid.tagged()) throw ValidationError("contrast weights need a region-tagged grid");
  std::vector<double> out(grid.num_cells());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = grid.tag(c) == Region::inclusion ? w.delta : 1.0;
  return out;
}

}  // namespace homoglab
