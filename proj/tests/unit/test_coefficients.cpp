#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "homoglab/coefficients.hpp"

using namespace homoglab;

TEST(ValidateStructure, IdentityIsExact) {
  auto rep = validate_structure(CoefficientField::identity(2), 8, 16);
  EXPECT_EQ(rep.symmetry_defect, 0.0);
  EXPECT_DOUBLE_EQ(rep.ellipticity_lower, 1.0);
  EXPECT_DOUBLE_EQ(rep.ellipticity_upper, 1.0);
  EXPECT_TRUE(rep.passed);
}

// Oracle: the smoothed profile attains values in [1,4]; on a fine lattice the
// extremes come within the tanh tail of the plateau values.
TEST(ValidateStructure, LayeredProfileBounds) {
  auto a = CoefficientField::layered(2, 1.0, 4.0, 0.05);
  auto rep = validate_structure(a, 64, 8);
  const double tail = 1.0 - std::tanh(std::sin(2 * M_PI * (0.5 / 64)) / 0.05);
  EXPECT_GE(rep.ellipticity_lower, 1.0);
  EXPECT_LE(rep.ellipticity_lower, 1.0 + 3.0 * tail);
  EXPECT_LE(rep.ellipticity_upper, 4.0);
  EXPECT_GE(rep.ellipticity_upper, 4.0 - 3.0 * tail);
  EXPECT_DOUBLE_EQ(rep.nu, 0.25);
  EXPECT_TRUE(rep.passed);
}

TEST(ValidateStructure, InjectedAsymmetryReported) {
  CoefficientField bad(2, 1,
                       [](const Point&) {
                         Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
                         a(0, 1) = 0.1;
                         return a;
                       },
                       0.5, CoefficientKind::custom);
  auto rep = validate_structure(bad, 4, 4);
  EXPECT_NEAR(rep.symmetry_defect, 0.1, 1e-15);
  EXPECT_FALSE(rep.symmetric);
  EXPECT_FALSE(rep.passed);
}

TEST(ValidateStructure, NonFiniteNamesPoint) {
  CoefficientField bad(2, 1,
                       [](const Point& y) {
                         Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
                         if (y[0] > 0.5) a(0, 0) = std::numeric_limits<double>::quiet_NaN();
                         return a;
                       },
                       1.0, CoefficientKind::custom);
  try {
    validate_structure(bad, 4, 2);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("y = (0.625"), std::string::npos) << e.what();
  }
}

TEST(ValidateStructure, BuiltInsPassProperty) {
  const std::vector<CoefficientField> fields = {
      CoefficientField::identity(2),
      CoefficientField::identity(2, 2),
      CoefficientField::layered(2, 1.0, 4.0, 0.0),
      CoefficientField::layered(2, 2.0, 0.5, 0.1, 1),
      CoefficientField::checkerboard(2, 1.0, 3.0, 0.2),
      CoefficientField::block_diagonal(2, {1.0, 2.5}),
      CoefficientField::layered(2, 1.0, 4.0, 0.05).scaled(0.5),
  };
  for (const auto& f : fields) {
    auto rep = validate_structure(f, 32, 12);
    EXPECT_LT(rep.symmetry_defect, 1e-14) << to_string(f.kind());
    EXPECT_TRUE(rep.elliptic) << to_string(f.kind()) << " lower " << rep.ellipticity_lower;
  }
}

TEST(CoefficientField, PeriodicByConstruction) {
  auto a = CoefficientField::checkerboard(2, 1.0, 3.0, 0.2);
  const Point y{0.3, 0.8, 0.0};
  const Point shifted{2.3, -3.2, 0.0};
  EXPECT_LT((a(y) - a(shifted)).norm(), 1e-12);
}

TEST(CoefficientField, HolderQuotientOfLipschitzField) {
  // |A(y)-A(w)| for a(y) = 2 + sin(2πy1) is bounded by its Lipschitz constant 2π√2 (Frobenius, 2×2 identity block).
  CoefficientField a(2, 1,
                     [](const Point& y) {
                       return ((2.0 + std::sin(2 * M_PI * y[0])) * Eigen::MatrixXd::Identity(2, 2)).eval();
                     },
                     1.0 / 3.0, CoefficientKind::custom);
  auto rep = validate_structure(a, 32, 2, 1.0);
  EXPECT_LE(rep.holder_quotient, 2 * M_PI * std::sqrt(2.0) + 1e-9);
  EXPECT_GE(rep.holder_quotient, 0.9 * 2 * M_PI * std::sqrt(2.0));
}

TEST(CoefficientField, SampledCsvInterpolates) {
  const auto path = std::filesystem::temp_directory_path() / "homoglab_coeff.csv";
  {
    std::ofstream out(path);
    out << "# y1,y2,a00,a01,a10,a11\n";
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        const double v = 1.0 + i + 2 * j;
        out << i / 2.0 << "," << j / 2.0 << "," << v << ",0,0," << v << "\n";
      }
  }
  auto a = load_coefficient_csv(path.string(), 2, 1, 1.0);
  EXPECT_EQ(a.kind(), CoefficientKind::sampled);
  EXPECT_NEAR(a({0.0, 0.0, 0.0})(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(a({0.5, 0.5, 0.0})(0, 0), 4.0, 1e-14);
  // Midpoint of the bilinear patch between (0,0)..(0.5,0.5).
  EXPECT_NEAR(a({0.25, 0.25, 0.0})(1, 1), 2.5, 1e-14);
  // Wraps periodically: y1 = 0.75 interpolates between node 1 and node 0.
  EXPECT_NEAR(a({0.75, 0.0, 0.0})(0, 0), 1.5, 1e-14);
  std::filesystem::remove(path);
}

TEST(ContrastWeight, KappaExact) {
  ContrastWeight w(0.01, 0.25);
  EXPECT_DOUBLE_EQ(w.kappa(), 0.0625 / 0.01);
  EXPECT_THROW(ContrastWeight(0.0), ValidationError);
  EXPECT_THROW(ContrastWeight(1.0).kappa(), ValidationError);
}

TEST(ContrastWeight, ValuesByTag) {
  auto geom = PeriodicGeometry::centered_box(2, 0.5);
  auto dom = build_epsilon_domain(geom, 2, 4);
  auto ones = contrast_weight_values(ContrastWeight(1.0), dom.grid);
  for (double v : ones) EXPECT_EQ(v, 1.0);

  auto w = contrast_weight_values(ContrastWeight(0.01), dom.grid);
  std::size_t small = 0;
  for (double v : w) small += v == 0.01;
  EXPECT_EQ(small, 4u * 4u);  // 4 inclusion blocks of 2×2 fine cells

  auto big = contrast_weight_values(ContrastWeight(1e3), dom.grid);
  double sum = 0.0;
  for (double v : big) sum += v;
  // δ·θ·n^d·ε^d·(cells per ε-cell) + matrix count.
  EXPECT_DOUBLE_EQ(sum, 1e3 * 0.25 * 4 * 0.25 * 64 + (64 - 16));
}

TEST(ContrastWeight, UntaggedGridRejected) {
  StructuredGrid g(2, {4, 4}, BoundaryCondition::dirichlet);
  EXPECT_THROW(contrast_weight_values(ContrastWeight(2.0), g), ValidationError);
}
