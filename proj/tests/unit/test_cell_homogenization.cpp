#include <gtest/gtest.h>

#include <cmath>

#include "homoglab/cell_homogenization.hpp"

using namespace homoglab;

namespace {

StructuredGrid cell_grid(int res, double side = 0.5) {
  return build_unit_cell_grid(PeriodicGeometry::centered_box(2, side), res);
}

LinearOptions direct() {
  LinearOptions o;
  o.method = LinearMethod::direct;
  return o;
}

}  // namespace

TEST(Correctors, IdentityGivesZeroCorrectors) {
  auto grid = cell_grid(8);
  auto chi = solve_correctors(grid, CoefficientField::identity(2), 1.0);
  for (const auto& c : chi.chi) EXPECT_LT(c.cwiseAbs().maxCoeff(), 1e-14);
  auto t = homogenized_tensor(grid, CoefficientField::identity(2), 1.0, chi);
  EXPECT_LT((t.entries - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-10);
}

// 1D corrector of a two-phase laminate: χ' = â/a − 1 with â the harmonic mean.
TEST(Correctors, LayeredMatchesOneDimensionalClosedForm) {
  const int res = 16;
  auto grid = cell_grid(res);
  auto a = CoefficientField::layered(2, 1.0, 4.0);
  auto chi = solve_correctors(grid, a, 1.0);
  const double ahat = 1.6;
  auto exact = [&](double t) {
    const double tent = t <= 0.5 ? (ahat - 1.0) * t : (ahat / 4.0 - 1.0) * (t - 1.0);
    return tent - 0.15;  // mean of the tent 0.6·min(t, 1−t)
  };
  const auto& c1 = chi.corrector(0, 0);
  const auto& c2 = chi.corrector(1, 0);
  for (std::size_t node = 0; node < grid.num_nodes(); ++node) {
    const auto x = grid.node_coordinates(node);
    EXPECT_NEAR(c1[static_cast<Eigen::Index>(node)], exact(x[0]), 1e-9);
    EXPECT_NEAR(c2[static_cast<Eigen::Index>(node)], 0.0, 1e-10);
  }
  auto t = homogenized_tensor(grid, a, 1.0, chi);
  EXPECT_NEAR(t.entries(0, 0), 1.6, 1e-9);
  EXPECT_NEAR(t.entries(1, 1), 2.5, 1e-9);
  EXPECT_NEAR(t.entries(0, 1), 0.0, 1e-9);
}

TEST(Correctors, MeanZeroAndContinuousInDelta) {
  auto grid = cell_grid(16);
  auto a = CoefficientField::checkerboard(2, 1.0, 3.0, 0.2);
  auto c1 = solve_correctors(grid, a, 1.0);
  auto c2 = solve_correctors(grid, a, 1.0 + 1e-6);
  const auto op = assemble_cell_operator(grid, a, 1.0);
  const Eigen::VectorXd w = op.mass * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.dimension));
  for (std::size_t k = 0; k < c1.chi.size(); ++k) {
    EXPECT_LT(std::abs(w.dot(c1.chi[k])), 1e-10);
    EXPECT_LE(std::sqrt((c1.chi[k] - c2.chi[k]).dot(op.mass * (c1.chi[k] - c2.chi[k]))), 1e-4);
  }
}

TEST(Correctors, CgAndDirectAgree) {
  auto grid = cell_grid(16);
  auto a = CoefficientField::layered(2, 1.0, 4.0, 0.1);
  auto cg = compute_homogenized_tensor(grid, a, 0.01);
  auto dl = compute_homogenized_tensor(grid, a, 0.01, direct());
  EXPECT_LT((cg.entries - dl.entries).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_GT(cg.cg_iterations, 0);
  EXPECT_EQ(dl.cg_iterations, 0);
}

TEST(HomogenizedTensor, MismatchedInputsRejected) {
  auto grid = cell_grid(8);
  auto a = CoefficientField::identity(2);
  auto chi = solve_correctors(grid, a, 1.0);
  EXPECT_THROW(homogenized_tensor(grid, a, 0.5, chi), ValidationError);
  EXPECT_THROW(homogenized_tensor(cell_grid(16), a, 1.0, chi), ValidationError);
}

TEST(HomogenizedTensor, PerforatedLimitBracketedAndStable) {
  auto grid = cell_grid(32);
  auto a = CoefficientField::identity(2);
  auto t6 = compute_homogenized_tensor(grid, a, 1e-6, direct());
  auto t8 = compute_homogenized_tensor(grid, a, 1e-8, direct());
  EXPECT_GT(t6.entries(0, 0), 0.5);
  EXPECT_LT(t6.entries(0, 0), 1.0);
  EXPECT_LT(std::abs(t6.entries(0, 0) - t8.entries(0, 0)), 1e-5);
  // Larger holes give a smaller perforated tensor.
  double prev = 1.0;
  for (double side : {0.25, 0.5, 0.75}) {
    auto t = compute_homogenized_tensor(cell_grid(32, side), a, 1e-6, direct());
    EXPECT_LT(t.entries(0, 0), prev);
    prev = t.entries(0, 0);
  }
}

TEST(HomogenizedTensor, VoigtReussBoundsProperty) {
  auto a = CoefficientField::identity(2);
  for (double side : {0.25, 0.5, 0.75}) {
    auto grid = cell_grid(16, side);
    const double theta = side * side;
    for (double delta : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
      auto t = compute_homogenized_tensor(grid, a, delta, direct());
      const double upper = theta * delta + (1 - theta);
      const double lower = 1.0 / (theta / delta + (1 - theta));
      EXPECT_GE(t.entries(0, 0), lower * (1 - 1e-10)) << side << " " << delta;
      EXPECT_LE(t.entries(0, 0), upper * (1 + 1e-10)) << side << " " << delta;
      EXPECT_LT(t.symmetry_defect, 1e-8);
      EXPECT_GT(t.min_eigenvalue, 0.0);
    }
  }
}

TEST(HomogenizedTensor, EnergyIdentity) {
  auto grid = cell_grid(16);
  for (const auto& a : {CoefficientField::layered(2, 1.0, 4.0, 0.1), CoefficientField::checkerboard(2, 1.0, 3.0, 0.2),
                        CoefficientField::block_diagonal(2, {1.0, 3.0})}) {
    for (double delta : {0.1, 1.0, 5.0}) {
      auto chi = solve_correctors(grid, a, delta);
      auto t = homogenized_tensor(grid, a, delta, chi);
      auto e = energy_form(grid, a, delta, chi);
      EXPECT_LT((t.entries - e).cwiseAbs().maxCoeff(), 1e-8) << to_string(a.kind()) << " " << delta;
    }
  }
}

TEST(HomogenizedTensor, RefinementConvergesForSmoothLayers) {
  auto a = CoefficientField::layered(2, 1.0, 4.0, 0.2);
  std::vector<double> vals;
  for (int res : {8, 16, 32, 64}) vals.push_back(compute_homogenized_tensor(cell_grid(res), a, 1.0).entries(0, 0));
  const double d1 = std::abs(vals[1] - vals[0]);
  const double d2 = std::abs(vals[2] - vals[1]);
  const double d3 = std::abs(vals[3] - vals[2]);
  EXPECT_GE(d1 / d2, 3.0);
  EXPECT_GE(d2 / d3, 3.0);
}

TEST(HomogenizedTensor, BlockDiagonalSystemScalesScalarTensor) {
  auto grid = cell_grid(16);
  auto scalar = compute_homogenized_tensor(grid, CoefficientField::identity(2), 0.1);
  auto sys = compute_homogenized_tensor(grid, CoefficientField::block_diagonal(2, {1.0, 2.0}), 0.1);
  ASSERT_EQ(sys.entries.rows(), 4);
  EXPECT_LT((sys.entries.topLeftCorner(2, 2) - scalar.entries).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((sys.entries.bottomRightCorner(2, 2) - 2.0 * scalar.entries).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(sys.entries.topRightCorner(2, 2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DeltaSweep, SingletonDuplicatesAndMonotone) {
  auto grid = cell_grid(16);
  auto a = CoefficientField::identity(2);
  auto one = tensor_delta_sweep(grid, a, {1.0});
  ASSERT_EQ(one.tensors.size(), 1u);
  EXPECT_LT((one.tensors[0].entries - compute_homogenized_tensor(grid, a, 1.0).entries).cwiseAbs().maxCoeff(), 1e-14);

  auto dup = tensor_delta_sweep(grid, a, {1.0, 1.0});
  EXPECT_EQ(dup.tensors[0].entries, dup.tensors[1].entries);

  auto mono = tensor_delta_sweep(grid, a, {1e-4, 1e-2, 1.0}, direct());
  EXPECT_TRUE(mono.a11_nondecreasing);
  EXPECT_LT(mono.tensors[0].entries(0, 0), mono.tensors[1].entries(0, 0));
  EXPECT_LT(mono.tensors[1].entries(0, 0), mono.tensors[2].entries(0, 0));

  EXPECT_THROW(tensor_delta_sweep(grid, a, {1.0, 0.1}), ValidationError);
}

TEST(HomogenizedTensor, JsonCarriesEntriesAndMetadata) {
  auto t = compute_homogenized_tensor(cell_grid(8), CoefficientField::identity(2), 1.0);
  auto j = to_json(t);
  EXPECT_EQ(j["entries"].size(), 4u);
  EXPECT_EQ(j["resolution"], 8);
  EXPECT_EQ(j["entries"][1]["j"], 1);
  EXPECT_EQ(j["entries"][1]["i"], 0);
}
