#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "homoglab/unfolding.hpp"

using namespace homoglab;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

TwoScaleGridFunction random_two_scale(std::mt19937_64& rng, const UnfoldingLayout& layout) {
  auto phi = zero_two_scale(layout);
  phi.values = random_vector(rng, layout.x_cells() * layout.y_cells());
  return phi;
}

// ‖φ‖² by explicit product quadrature over (fine x-cell) × (y-cell) boxes.
double product_quadrature_norm(const TwoScaleGridFunction& phi) {
  const auto& l = phi.layout;
  const double hx = 1.0 / l.fine_per_axis();
  const double hy = 1.0 / l.subcells;
  double sum = 0.0;
  for (std::size_t c = 0; c < l.x_cells(); ++c)
    for (std::size_t q = 0; q < l.y_cells(); ++q) {
      double vol = 1.0;
      for (int a = 0; a < l.dim; ++a) vol *= hx * hy;
      sum += vol * phi.at(c, q) * phi.at(c, q);
    }
  return std::sqrt(sum);
}

}  // namespace

TEST(Unfolding, ConstantsAreFixed) {
  const auto l = make_unfolding_layout(2, 4, 4);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(l.x_cells()), 2.5);
  auto t = unfold(l, u);
  EXPECT_EQ(t.values.minCoeff(), 2.5);
  EXPECT_EQ(t.values.maxCoeff(), 2.5);
}

TEST(Unfolding, AffineFunctionReindexesExactly) {
  const auto l = make_unfolding_layout(2, 4, 8);
  const auto u = cell_averages(l, [](const Point& x) { return x[0]; });
  const auto t = unfold(l, u);
  for (std::size_t c = 0; c < l.x_cells(); ++c) {
    const auto k = static_cast<int>(l.x_center(c)[0] * l.n);
    for (std::size_t q = 0; q < l.y_cells(); ++q)
      EXPECT_NEAR(t.at(c, q), l.epsilon() * k + l.epsilon() * l.y_center(q)[0], 1e-15);
  }
}

TEST(Unfolding, NormByProductQuadratureAndIsometry) {
  std::mt19937_64 rng(11);
  for (int n : {2, 4, 8}) {
    const auto l = make_unfolding_layout(2, n, 4);
    const auto u = random_vector(rng, l.x_cells());
    const auto t = unfold(l, u);
    EXPECT_NEAR(t.norm(), product_quadrature_norm(t), 1e-12 * t.norm());
    // ‖u‖ by its own quadrature: Σ h^d u².
    double s = 0.0;
    for (auto v : u) s += v * v / (l.fine_per_axis() * l.fine_per_axis());
    EXPECT_NEAR(t.norm(), std::sqrt(s), 1e-12 * std::sqrt(s));
  }
}

TEST(Unfolding, AlgebraOnRandomInputs) {
  std::mt19937_64 rng(7);
  for (int n : {4, 8, 16}) {
    const auto l = make_unfolding_layout(2, n, 4);
    for (int trial = 0; trial < 10; ++trial) {
      const auto u = random_vector(rng, l.x_cells());
      const auto phi = random_two_scale(rng, l);
      const auto psi = random_two_scale(rng, l);
      const double scale = u.norm() * phi.values.norm();

      EXPECT_LE((average(unfold(l, u)) - u).cwiseAbs().maxCoeff(), 1e-12 * u.cwiseAbs().maxCoeff());
      EXPECT_NEAR(l2_inner(l, average(phi), u), l2_inner(phi, unfold(l, u)), 1e-12 * scale * l.x_weight());

      const auto p = project(phi);
      EXPECT_LE((project(p).values - p.values).cwiseAbs().maxCoeff(), 1e-12 * phi.values.cwiseAbs().maxCoeff());
      EXPECT_NEAR(l2_inner(p, psi), l2_inner(phi, project(psi)),
                  1e-12 * phi.values.norm() * psi.values.norm() * l.x_weight() * l.y_weight());
      EXPECT_LE(p.norm(), phi.norm() * (1 + 1e-14));
      EXPECT_LE((unfold(l, average(phi)).values - p.values).cwiseAbs().maxCoeff(), 1e-14 * phi.values.norm());

      EXPECT_LE(l2_norm(l, average(phi)), phi.norm() * (1 + 1e-14));
      EXPECT_NEAR(unfold(l, u).norm(), l2_norm(l, u), 1e-12 * l2_norm(l, u));
    }
  }
}

TEST(Unfolding, CellwiseConstantInXIsFixedByProjection) {
  std::mt19937_64 rng(3);
  const auto l = make_unfolding_layout(2, 4, 4);
  const auto base = random_vector(rng, l.lattice_cells() * l.y_cells());
  auto phi = zero_two_scale(l);
  for (std::size_t k = 0; k < l.lattice_cells(); ++k)
    for (std::size_t r = 0; r < l.y_cells(); ++r)
      for (std::size_t q = 0; q < l.y_cells(); ++q)
        phi.at(l.x_index(l.lattice_multi_index(k), l.y_multi_index(r)), q) =
            base[static_cast<Eigen::Index>(k * l.y_cells() + q)];
  EXPECT_LE((project(phi).values - phi.values).cwiseAbs().maxCoeff(), 1e-14 * base.cwiseAbs().maxCoeff());
}

TEST(Unfolding, CellIndependentProfileAveragesToOscillation) {
  const auto l = make_unfolding_layout(2, 4, 8);
  auto f = [](const Point& y) { return 1.0 + std::sin(2 * M_PI * y[0]) * y[1]; };
  auto phi = zero_two_scale(l);
  for (std::size_t c = 0; c < l.x_cells(); ++c)
    for (std::size_t q = 0; q < l.y_cells(); ++q) phi.at(c, q) = f(l.y_center(q));
  const auto u = average(phi);
  double mean_f = 0.0;
  for (std::size_t q = 0; q < l.y_cells(); ++q) mean_f += f(l.y_center(q)) * l.y_weight();
  for (std::size_t c = 0; c < l.x_cells(); ++c) {
    const Point x = l.x_center(c);
    Point y{0, 0, 0};
    for (int a = 0; a < 2; ++a) y[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(a)] * l.n - std::floor(x[static_cast<std::size_t>(a)] * l.n);
    EXPECT_NEAR(u[static_cast<Eigen::Index>(c)], f(y), 1e-12);
  }
  EXPECT_NEAR(u.sum() * l.x_weight(), mean_f, 1e-13);
}

TEST(Unfolding, ResolutionMismatchRejected) {
  const auto l = make_unfolding_layout(2, 4, 4);
  EXPECT_THROW(unfold(l, Eigen::VectorXd::Zero(10)), ValidationError);
  StructuredGrid plain(2, {16, 16}, BoundaryCondition::dirichlet);
  EXPECT_THROW(make_unfolding_layout(plain), ValidationError);
  auto other = zero_two_scale(make_unfolding_layout(2, 2, 4));
  EXPECT_THROW(l2_inner(zero_two_scale(l), other), ValidationError);
}

TEST(Unfolding, LayoutMatchesEpsilonDomainCells) {
  auto dom = build_epsilon_domain(PeriodicGeometry::centered_box(2, 0.5), 2, 4);
  const auto l = make_unfolding_layout(dom.grid);
  ASSERT_EQ(l.x_cells(), dom.grid.num_cells());
  for (std::size_t c = 0; c < l.x_cells(); ++c) {
    const auto p = dom.grid.cell_barycenter(c);
    const auto q = l.x_center(c);
    EXPECT_NEAR(p[0], q[0], 1e-15);
    EXPECT_NEAR(p[1], q[1], 1e-15);
  }
  // Q1 cell averages of the bilinear x₁x₂ are exact.
  Eigen::VectorXd nodal(static_cast<Eigen::Index>(dom.grid.num_nodes()));
  for (std::size_t i = 0; i < dom.grid.num_nodes(); ++i) {
    const auto x = dom.grid.node_coordinates(i);
    nodal[static_cast<Eigen::Index>(i)] = x[0] * x[1];
  }
  const auto avg = nodal_to_cell_averages(dom.grid, nodal);
  const auto ref = cell_averages(l, [](const Point& x) { return x[0] * x[1]; });
  EXPECT_LT((avg - ref).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(UnfoldingRates, ConstantFamilyGivesZero) {
  const auto rep = estimate_norm_bounds({constant_function(2, 3.0)}, {4, 8}, 2, 4);
  for (const auto& r : rep.rows) {
    EXPECT_LT(r.r_a, 1e-14);
    EXPECT_LT(r.r_b, 1e-14);
    EXPECT_LT(r.r_c, 1e-14);
  }
  EXPECT_THROW(estimate_norm_bounds({}, {4}, 2, 4), ValidationError);
}

TEST(UnfoldingRates, SineFamilyDecaysLinearly) {
  const auto rep = estimate_norm_bounds(sine_family(2, 2), {4, 8, 16, 32}, 2, 8);
  ASSERT_TRUE(rep.slope_a && rep.slope_b && rep.slope_c);
  EXPECT_GE(*rep.slope_a, 0.9);
  EXPECT_GE(*rep.slope_b, 0.9);
  EXPECT_GE(*rep.slope_c, 0.9);
  for (const auto& r : rep.rows) EXPECT_GT(r.r_a, 0.0);
  const auto j = to_json(rep);
  EXPECT_EQ(j["rows"].size(), 4u);
  EXPECT_NE(unfolding_rates_csv(rep).find("epsilon,r_a,r_b,r_c"), std::string::npos);
}

TEST(UnfoldingRates, SingleSineMatchesCellAverageOracle) {
  // ‖P_ε u − u‖ for u = sin πx₁ sin πx₂ evaluated independently from the
  // closed-form cell averages of each factor.
  const int n = 8, m = 8;
  const auto rep = estimate_norm_bounds({sine_family(2, 1)[0]}, {n}, 2, m);
  const double h = 1.0 / (n * m);
  auto fine_avg = [&](int i) { return (std::cos(M_PI * i * h) - std::cos(M_PI * (i + 1) * h)) / (M_PI * h); };
  auto coarse_avg = [&](int k) { return (std::cos(M_PI * k / n) - std::cos(M_PI * (k + 1.0) / n)) * n / M_PI; };
  // Separable: ‖PΠu − Πu‖² = Σ (ĉ_kĉ_l − f_if_j)² h².
  double s = 0.0;
  for (int i = 0; i < n * m; ++i)
    for (int j = 0; j < n * m; ++j) {
      const double d = coarse_avg(i / m) * coarse_avg(j / m) - fine_avg(i) * fine_avg(j);
      s += d * d * h * h;
    }
  const double h1 = std::sqrt(0.25 * (1 + 2 * M_PI * M_PI));
  EXPECT_NEAR(rep.rows[0].r_c, std::sqrt(s) / h1, 1e-9);
}

TEST(Slopes, FitRecoversPowerLaw) {
  std::vector<double> x = {0.25, 0.125, 0.0625}, y;
  for (double v : x) y.push_back(3.0 * v * v);
  EXPECT_NEAR(*fit_loglog_slope(x, y), 2.0, 1e-12);
  EXPECT_FALSE(fit_loglog_slope({0.5}, {1.0}).has_value());
  EXPECT_FALSE(fit_loglog_slope({0.5, 0.25}, {0.0, 0.0}).has_value());
}
