#include "homoglab/unfolding.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "homoglab/errors.hpp"
#include "homoglab/parallel.hpp"

namespace homoglab {

namespace {

std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

MultiIndex decompose(std::size_t index, int dim, int base) {
  MultiIndex out{0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    out[static_cast<std::size_t>(a)] = static_cast<int>(index % static_cast<std::size_t>(base));
    index /= static_cast<std::size_t>(base);
  }
  return out;
}

void require_size(const UnfoldingLayout& layout, const Eigen::VectorXd& u) {
  if (static_cast<std::size_t>(u.size()) != layout.x_cells())
    throw ValidationError("grid function has " + std::to_string(u.size()) + " entries, layout expects " +
                          std::to_string(layout.x_cells()));
}

void require_same(const UnfoldingLayout& a, const UnfoldingLayout& b) {
  if (a.dim != b.dim || a.n != b.n || a.subcells != b.subcells)
    throw ValidationError("two-scale functions live on different layouts");
}

// Runs body(k, cell) for every ε-cell on the worker pool; each ε-cell owns a
// disjoint block of outputs, so results do not depend on scheduling.
void for_each_lattice_cell(const UnfoldingLayout& layout, const std::function<void(const MultiIndex&)>& body) {
  parallel_for(layout.lattice_cells(), [&](std::size_t k) { body(layout.lattice_multi_index(k)); });
}

}  // namespace

std::size_t UnfoldingLayout::x_cells() const { return ipow(static_cast<std::size_t>(fine_per_axis()), dim); }
std::size_t UnfoldingLayout::y_cells() const { return ipow(static_cast<std::size_t>(subcells), dim); }
std::size_t UnfoldingLayout::lattice_cells() const { return ipow(static_cast<std::size_t>(n), dim); }
double UnfoldingLayout::x_weight() const { return std::pow(1.0 / fine_per_axis(), dim); }
double UnfoldingLayout::y_weight() const { return std::pow(1.0 / subcells, dim); }

std::size_t UnfoldingLayout::x_index(const MultiIndex& cell, const MultiIndex& local) const {
  std::size_t idx = 0;
  for (int a = dim - 1; a >= 0; --a) {
    const auto s = static_cast<std::size_t>(a);
    idx = idx * static_cast<std::size_t>(fine_per_axis()) +
          static_cast<std::size_t>(cell[s] * subcells + local[s]);
  }
  return idx;
}

std::size_t UnfoldingLayout::y_index(const MultiIndex& local) const {
  std::size_t idx = 0;
  for (int a = dim - 1; a >= 0; --a)
    idx = idx * static_cast<std::size_t>(subcells) + static_cast<std::size_t>(local[static_cast<std::size_t>(a)]);
  return idx;
}

MultiIndex UnfoldingLayout::y_multi_index(std::size_t q) const { return decompose(q, dim, subcells); }
MultiIndex UnfoldingLayout::lattice_multi_index(std::size_t k) const { return decompose(k, dim, n); }

Point UnfoldingLayout::x_center(std::size_t c) const {
  const auto idx = decompose(c, dim, fine_per_axis());
  Point p{0, 0, 0};
  for (int a = 0; a < dim; ++a)
    p[static_cast<std::size_t>(a)] = (idx[static_cast<std::size_t>(a)] + 0.5) / fine_per_axis();
  return p;
}

Point UnfoldingLayout::y_center(std::size_t q) const {
  const auto idx = y_multi_index(q);
  Point p{0, 0, 0};
  for (int a = 0; a < dim; ++a) p[static_cast<std::size_t>(a)] = (idx[static_cast<std::size_t>(a)] + 0.5) / subcells;
  return p;
}

UnfoldingLayout make_unfolding_layout(int dim, int n, int subcells) {
  if (dim < 1 || dim > kMaxDim) throw ValidationError("dimension must be 1, 2 or 3");
  if (n < 1 || subcells < 1) throw ValidationError("n and M must be positive");
  return {dim, n, subcells};
}

UnfoldingLayout make_unfolding_layout(const StructuredGrid& grid) {
  if (!grid.has_lattice()) throw ValidationError("grid carries no ε-lattice");
  for (int a = 0; a < grid.dim(); ++a)
    if (grid.resolution(a) != grid.lattice_n() * grid.subcells())
      throw ValidationError("grid resolution " + std::to_string(grid.resolution(a)) + " is not n·M = " +
                            std::to_string(grid.lattice_n() * grid.subcells()));
  return make_unfolding_layout(grid.dim(), grid.lattice_n(), grid.subcells());
}

double TwoScaleGridFunction::norm() const { return std::sqrt(layout.x_weight() * layout.y_weight()) * values.norm(); }

TwoScaleGridFunction zero_two_scale(const UnfoldingLayout& layout) {
  return {layout, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.x_cells() * layout.y_cells()))};
}

TwoScaleGridFunction unfold(const UnfoldingLayout& layout, const Eigen::VectorXd& u) {
  require_size(layout, u);
  auto out = zero_two_scale(layout);
  const auto ny = layout.y_cells();
  for_each_lattice_cell(layout, [&](const MultiIndex& k) {
    for (std::size_t r = 0; r < ny; ++r) {
      const auto c = layout.x_index(k, layout.y_multi_index(r));
      for (std::size_t q = 0; q < ny; ++q)
        out.at(c, q) = u[static_cast<Eigen::Index>(layout.x_index(k, layout.y_multi_index(q)))];
    }
  });
  return out;
}

Eigen::VectorXd average(const TwoScaleGridFunction& phi) {
  const auto& layout = phi.layout;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.x_cells()));
  const auto ny = layout.y_cells();
  for_each_lattice_cell(layout, [&](const MultiIndex& k) {
    for (std::size_t s = 0; s < ny; ++s) {
      // The y-argument is {x/ε}, i.e. the local position s of x; z runs over
      // the fine cells r of the same ε-cell.
      double sum = 0.0;
      for (std::size_t r = 0; r < ny; ++r) sum += phi.at(layout.x_index(k, layout.y_multi_index(r)), s);
      out[static_cast<Eigen::Index>(layout.x_index(k, layout.y_multi_index(s)))] = sum * layout.y_weight();
    }
  });
  return out;
}

TwoScaleGridFunction project(const TwoScaleGridFunction& phi) {
  const auto& layout = phi.layout;
  auto out = zero_two_scale(layout);
  const auto ny = layout.y_cells();
  for_each_lattice_cell(layout, [&](const MultiIndex& k) {
    for (std::size_t q = 0; q < ny; ++q) {
      double sum = 0.0;
      for (std::size_t r = 0; r < ny; ++r) sum += phi.at(layout.x_index(k, layout.y_multi_index(r)), q);
      const double mean = sum * layout.y_weight();
      for (std::size_t r = 0; r < ny; ++r) out.at(layout.x_index(k, layout.y_multi_index(r)), q) = mean;
    }
  });
  return out;
}

Eigen::VectorXd y_mean(const TwoScaleGridFunction& phi) {
  const auto& layout = phi.layout;
  const auto ny = static_cast<Eigen::Index>(layout.y_cells());
  const Eigen::Map<const Eigen::MatrixXd> table(phi.values.data(), ny, static_cast<Eigen::Index>(layout.x_cells()));
  return table.colwise().sum().transpose() * layout.y_weight();
}

TwoScaleGridFunction embed(const UnfoldingLayout& layout, const Eigen::VectorXd& u) {
  require_size(layout, u);
  auto out = zero_two_scale(layout);
  const auto ny = layout.y_cells();
  for (std::size_t c = 0; c < layout.x_cells(); ++c)
    for (std::size_t q = 0; q < ny; ++q) out.at(c, q) = u[static_cast<Eigen::Index>(c)];
  return out;
}

Eigen::VectorXd cell_project(const UnfoldingLayout& layout, const Eigen::VectorXd& u) {
  require_size(layout, u);
  Eigen::VectorXd out(u.size());
  const auto ny = layout.y_cells();
  for_each_lattice_cell(layout, [&](const MultiIndex& k) {
    double sum = 0.0;
    for (std::size_t r = 0; r < ny; ++r) sum += u[static_cast<Eigen::Index>(layout.x_index(k, layout.y_multi_index(r)))];
    for (std::size_t r = 0; r < ny; ++r)
      out[static_cast<Eigen::Index>(layout.x_index(k, layout.y_multi_index(r)))] = sum * layout.y_weight();
  });
  return out;
}

double l2_inner(const UnfoldingLayout& layout, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  require_size(layout, u);
  require_size(layout, v);
  return layout.x_weight() * u.dot(v);
}

double l2_norm(const UnfoldingLayout& layout, const Eigen::VectorXd& u) { return std::sqrt(l2_inner(layout, u, u)); }

double l2_inner(const TwoScaleGridFunction& a, const TwoScaleGridFunction& b) {
  require_same(a.layout, b.layout);
  return a.layout.x_weight() * a.layout.y_weight() * a.values.dot(b.values);
}

Eigen::VectorXd cell_averages(const UnfoldingLayout& layout, const std::function<double(const Point&)>& f) {
  static constexpr double kNodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr double kWeights[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const double h = 1.0 / layout.fine_per_axis();
  const auto points = ipow(3, layout.dim);
  Eigen::VectorXd out(static_cast<Eigen::Index>(layout.x_cells()));
  parallel_for(layout.x_cells(), [&](std::size_t c) {
    const Point center = layout.x_center(c);
    double sum = 0.0;
    for (std::size_t g = 0; g < points; ++g) {
      const auto gi = decompose(g, layout.dim, 3);
      Point p = center;
      double w = 1.0;
      for (int a = 0; a < layout.dim; ++a) {
        const auto s = static_cast<std::size_t>(a);
        p[s] += 0.5 * h * kNodes[gi[s]];
        w *= kWeights[gi[s]];
      }
      sum += w * f(p);
    }
    out[static_cast<Eigen::Index>(c)] = sum;
  });
  return out;
}

Eigen::VectorXd nodal_to_cell_averages(const StructuredGrid& grid, const Eigen::VectorXd& nodal) {
  if (static_cast<std::size_t>(nodal.size()) != grid.num_nodes())
    throw ValidationError("nodal vector size does not match the grid");
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.num_cells()));
  const int per = grid.nodes_per_cell();
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    const auto nodes = grid.cell_nodes(c);
    double sum = 0.0;
    for (int j = 0; j < per; ++j) sum += nodal[static_cast<Eigen::Index>(nodes[static_cast<std::size_t>(j)])];
    out[static_cast<Eigen::Index>(c)] = sum / per;
  }
  return out;
}

std::vector<SmoothFunction> sine_family(int dim, int max_frequency) {
  if (dim < 1 || dim > kMaxDim || max_frequency < 1) throw ValidationError("invalid sine family");
  std::vector<SmoothFunction> out;
  const auto total = ipow(static_cast<std::size_t>(max_frequency), dim);
  for (std::size_t idx = 0; idx < total; ++idx) {
    auto k = decompose(idx, dim, max_frequency);
    double ksq = 0.0;
    std::string label = "sin";
    for (int a = 0; a < dim; ++a) {
      auto& ka = k[static_cast<std::size_t>(a)];
      ka += 1;
      ksq += ka * ka;
      label += (a ? "_" : "") + std::to_string(ka);
    }
    // ∫ sin² = ∫ cos² = 1/2 per axis.
    const double h1 = std::sqrt(std::pow(0.5, dim) * (1.0 + M_PI * M_PI * ksq));
    out.push_back({label,
                   [k, dim](const Point& x) {
                     double v = 1.0;
                     for (int a = 0; a < dim; ++a)
                       v *= std::sin(k[static_cast<std::size_t>(a)] * M_PI * x[static_cast<std::size_t>(a)]);
                     return v;
                   },
                   h1, true});
  }
  return out;
}

SmoothFunction constant_function(int dim, double c) {
  (void)dim;
  return {"constant", [c](const Point&) { return c; }, std::abs(c), false};
}

std::optional<double> fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("slope fit needs paired samples");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return std::nullopt;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

UnfoldingRateReport estimate_norm_bounds(const std::vector<SmoothFunction>& family, const std::vector<int>& ns,
                                         int dim, int subcells) {
  if (family.empty()) throw ValidationError("test family is empty");
  if (ns.empty()) throw ValidationError("ε list is empty");
  UnfoldingRateReport report;
  const std::vector<std::function<double(const Point&)>> y_profiles = {
      [](const Point&) { return 1.0; },
      [](const Point& y) { return std::sin(2 * M_PI * y[0]); },
      [dim](const Point& y) { return std::cos(2 * M_PI * y[0]) * (dim > 1 ? std::cos(2 * M_PI * y[1]) : 1.0); },
  };
  for (int n : ns) {
    const auto layout = make_unfolding_layout(dim, n, subcells);
    UnfoldingRateRow row;
    row.epsilon = layout.epsilon();
    std::vector<Eigen::VectorXd> samples;
    for (const auto& f : family) samples.push_back(cell_averages(layout, f.value));

    for (std::size_t i = 0; i < family.size(); ++i) {
      if (family[i].h1_norm <= 0.0) continue;
      const auto& u = samples[i];
      row.r_c = std::max(row.r_c, l2_norm(layout, cell_project(layout, u) - u) / family[i].h1_norm);
      auto diff = unfold(layout, u);
      diff.values -= embed(layout, u).values;
      row.r_b = std::max(row.r_b, diff.norm() / family[i].h1_norm);
    }

    // g(y) sampled at y-cell averages.
    std::vector<Eigen::VectorXd> g_samples;
    const auto ylayout = make_unfolding_layout(dim, 1, subcells);
    for (const auto& g : y_profiles) g_samples.push_back(cell_averages(ylayout, g));
    for (std::size_t i = 0; i < family.size(); ++i) {
      for (const auto& g : g_samples) {
        auto phi = zero_two_scale(layout);
        for (std::size_t c = 0; c < layout.x_cells(); ++c)
          for (std::size_t q = 0; q < layout.y_cells(); ++q)
            phi.at(c, q) = samples[i][static_cast<Eigen::Index>(c)] * g[static_cast<Eigen::Index>(q)];
        const double phi_norm = phi.norm();
        if (phi_norm == 0.0) continue;
        const Eigen::VectorXd defect = average(phi) - y_mean(phi);
        for (std::size_t j = 0; j < family.size(); ++j) {
          if (!family[j].vanishes_on_boundary || family[j].h1_norm <= 0.0) continue;
          const double q = std::abs(l2_inner(layout, defect, samples[j])) / (phi_norm * family[j].h1_norm);
          row.r_a = std::max(row.r_a, q);
        }
      }
    }
    report.rows.push_back(row);
  }
  std::vector<double> eps, ra, rb, rc;
  for (const auto& r : report.rows) {
    eps.push_back(r.epsilon);
    ra.push_back(r.r_a);
    rb.push_back(r.r_b);
    rc.push_back(r.r_c);
  }
  report.slope_a = fit_loglog_slope(eps, ra);
  report.slope_b = fit_loglog_slope(eps, rb);
  report.slope_c = fit_loglog_slope(eps, rc);
  return report;
}

std::string unfolding_rates_csv(const UnfoldingRateReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "epsilon,r_a,r_b,r_c\n";
  for (const auto& r : report.rows) os << r.epsilon << "," << r.r_a << "," << r.r_b << "," << r.r_c << "\n";
  return os.str();
}

nlohmann::json to_json(const UnfoldingRateReport& report) {
  auto slope = [](const std::optional<double>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["slope_r_a"] = slope(report.slope_a);
  j["slope_r_b"] = slope(report.slope_b);
  j["slope_r_c"] = slope(report.slope_c);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"epsilon", r.epsilon}, {"r_a", r.r_a}, {"r_b", r.r_b}, {"r_c", r.r_c}});
  return j;
}

}  // namespace homoglab
