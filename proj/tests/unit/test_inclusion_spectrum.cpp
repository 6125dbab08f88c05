#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "homoglab/inclusion_spectrum.hpp"

using namespace homoglab;

namespace {

// Exact Q1 data for the square inclusion (a, a+L)² with A = I on a grid of
// spacing h: eigenvectors are tensor products of discrete sines, so mode
// (k,l) has μ = λ_k + λ_l and mean (∫s_k)(∫s_l) in the M-normalization.
struct DiscreteSquare {
  double L;
  double h;
  int interior;  // interior nodes per axis

  double lambda(int k) const {
    const double c = std::cos(k * M_PI * h / L);
    return 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
  }
  double mean1d(int k) const {
    double sum = 0.0, norm2 = 0.0;
    std::vector<double> s(static_cast<std::size_t>(interior));
    for (int j = 0; j < interior; ++j) s[static_cast<std::size_t>(j)] = std::sin(k * M_PI * (j + 1) * h / L);
    for (int j = 0; j < interior; ++j) {
      sum += h * s[static_cast<std::size_t>(j)];
      norm2 += 4.0 * h / 6.0 * s[static_cast<std::size_t>(j)] * s[static_cast<std::size_t>(j)];
      if (j + 1 < interior) norm2 += 2.0 * h / 6.0 * s[static_cast<std::size_t>(j)] * s[static_cast<std::size_t>(j + 1)];
    }
    return sum / std::sqrt(norm2);
  }
  // All modes with μ ≤ cap, as (μ, c).
  std::vector<std::pair<double, double>> modes_below(double cap) const {
    std::vector<std::pair<double, double>> out;
    for (int k = 1; k <= interior; ++k)
      for (int l = 1; l <= interior; ++l) {
        const double mu = lambda(k) + lambda(l);
        const double m = mean1d(k) * mean1d(l);
        if (mu <= cap) out.emplace_back(mu, m * m);
      }
    std::sort(out.begin(), out.end());
    return out;
  }
};

PeriodicGeometry square() { return PeriodicGeometry::centered_box(2, 0.5); }

}  // namespace

TEST(InclusionSpectrum, LeadingValuesApproachClosedForm) {
  auto grid = build_unit_cell_grid(square(), 32);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 12);
  const double pi2 = M_PI * M_PI;
  ASSERT_FALSE(spec.betas().empty());
  ASSERT_FALSE(spec.alphas().empty());
  EXPECT_NEAR(spec.betas()[0], 1.0 / (8 * pi2), 0.01 / (8 * pi2));
  EXPECT_NEAR(spec.alphas()[0], 1.0 / (20 * pi2), 0.03 / (20 * pi2));
  EXPECT_NEAR(spec.beta_weights()[0], 16.0 / (pi2 * pi2), 0.01 * 16.0 / (pi2 * pi2));
  EXPECT_TRUE(std::is_sorted(spec.inv.rbegin(), spec.inv.rend()));
  for (double v : spec.inv) EXPECT_GT(v, 0.0);
}

TEST(InclusionSpectrum, WeightsMatchDiscreteSineOracle) {
  const int res = 32;
  auto grid = build_unit_cell_grid(square(), res);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 60);
  DiscreteSquare oracle{0.5, 1.0 / res, 15};
  const double cap = spec.mu.back() * (1 + 1e-9);
  const auto modes = oracle.modes_below(cap);
  ASSERT_EQ(modes.size(), spec.size());
  double oracle_sum = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    EXPECT_NEAR(spec.mu[i], modes[i].first, 1e-8 * modes[i].first);
    oracle_sum += modes[i].second;
  }
  EXPECT_NEAR(spec.weight_sum(), oracle_sum, 1e-10);
  // Per cluster, the carried weight equals the cluster's oracle weight.
  for (const auto& c : spec.clusters) {
    double got = 0.0, want = 0.0;
    for (std::size_t k = c.first; k < c.first + c.dimension; ++k) {
      got += spec.weights[k];
      want += modes[k].second;
    }
    EXPECT_NEAR(got, want, 1e-10);
  }
  EXPECT_LE(spec.weight_sum(), spec.theta);
}

TEST(InclusionSpectrum, ParityRuleWithClusterRotation) {
  const int res = 32;
  auto grid = build_unit_cell_grid(square(), res);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 40);
  DiscreteSquare oracle{0.5, 1.0 / res, 15};
  // Count odd-odd pairs per μ level; each level with such pairs carries
  // exactly one nonzero-mean vector after the mean functional is diagonalized.
  std::map<long long, int> odd_odd;
  for (int k = 1; k <= 15; ++k)
    for (int l = 1; l <= 15; ++l) {
      const auto key = std::llround((oracle.lambda(k) + oracle.lambda(l)) * 1e4);
      odd_odd[key] += (k % 2 == 1 && l % 2 == 1);
    }
  for (const auto& c : spec.clusters) {
    std::size_t nonzero = 0;
    for (std::size_t k = c.first; k < c.first + c.dimension; ++k) nonzero += spec.branch[k] == ModeBranch::nonzero_mean;
    const auto key = std::llround(c.value * 1e4);
    ASSERT_TRUE(odd_odd.count(key)) << c.value;
    EXPECT_EQ(nonzero, odd_odd[key] > 0 ? 1u : 0u) << c.value;
  }
}

TEST(InclusionSpectrum, WeightsPositiveExactlyOnNonzeroBranch) {
  auto grid = build_unit_cell_grid(square(), 16);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::layered(2, 1.0, 2.0, 0.1), 20);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    EXPECT_GE(spec.psi_means[k], 0.0);
    if (spec.branch[k] == ModeBranch::nonzero_mean) {
      EXPECT_GT(spec.weights[k], 0.0);
    } else {
      EXPECT_EQ(spec.weights[k], 0.0);
    }
  }
}

TEST(InclusionSpectrum, ScalingCovariance) {
  auto grid = build_unit_cell_grid(square(), 16);
  auto a = CoefficientField::checkerboard(2, 1.0, 2.0, 0.3);
  auto base = compute_inclusion_spectrum(grid, square(), a, 16);
  auto scaled = compute_inclusion_spectrum(grid, square(), a.scaled(4.0), 16);
  ASSERT_EQ(base.size(), scaled.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    EXPECT_NEAR(scaled.mu[k], 4.0 * base.mu[k], 1e-8 * scaled.mu[k]);
    EXPECT_NEAR(scaled.inv[k], base.inv[k] / 4.0, 1e-8 * base.inv[k]);
    EXPECT_EQ(scaled.branch[k], base.branch[k]);
    EXPECT_NEAR(scaled.weights[k], base.weights[k], 1e-8);
  }
}

TEST(InclusionSpectrum, CompleteSpectrumExhaustsDiscreteParseval) {
  auto grid = build_unit_cell_grid(square(), 8);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 1000);
  EXPECT_TRUE(spec.complete());
  EXPECT_EQ(spec.size(), 9u);
  // Σ_i (wᵀψ_i)² = wᵀ M⁻¹ w for an M-orthonormal basis.
  const auto op = assemble_inclusion_operator(grid, CoefficientField::identity(2));
  Eigen::SimplicialLDLT<SparseMatrix> m(op.mass);
  const Eigen::VectorXd& w = spec.integral_weights;
  EXPECT_NEAR(spec.weight_sum(), w.dot(m.solve(w)), 1e-13);
  EXPECT_GT(spec.tail(), 0.0);
}

TEST(InclusionSpectrum, RejectsTooFewModes) {
  auto grid = build_unit_cell_grid(square(), 8);
  EXPECT_THROW(compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 3), ValidationError);
}

TEST(BlochSpectrum, MultiplicityAndScaling) {
  auto grid = build_unit_cell_grid(square(), 32);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 12);
  auto lat = make_epsilon_lattice(2, 2);
  auto b1 = bloch_spectrum(spec, lat, 1.0);
  ASSERT_FALSE(b1.empty());
  EXPECT_NEAR(b1[0].value, 1.0 / (20 * M_PI * M_PI), 0.03 / (20 * M_PI * M_PI));
  EXPECT_EQ(b1[0].cluster_dimension, 2u);
  EXPECT_EQ(b1[0].multiplicity, 8u);
  auto b2 = bloch_spectrum(spec, lat, 2.0);
  ASSERT_EQ(b1.size(), b2.size());
  for (std::size_t i = 0; i < b1.size(); ++i) {
    EXPECT_NEAR(b2[i].value, 2.0 * b1[i].value, 1e-15);
    if (i > 0) {
      EXPECT_LT(b1[i].value, b1[i - 1].value);
    }
  }
  EXPECT_EQ(bloch_spectrum(spec, make_epsilon_lattice(2, 4), 1.0)[0].multiplicity, 32u);
}

TEST(BlochSpectrum, EmptyMeanZeroBranchFlagged) {
  auto grid = build_unit_cell_grid(square(), 32);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 4);
  // Keep only the first (nonzero-mean) cluster.
  InclusionSpectrum cut = spec;
  cut.clusters.resize(1);
  EXPECT_THROW(bloch_spectrum(cut, make_epsilon_lattice(2, 2), 1.0), NumericalError);
  EXPECT_THROW(bloch_spectrum(spec, make_epsilon_lattice(2, 2), 0.0), ValidationError);
}

TEST(InclusionSpectrum, CsvRows) {
  auto grid = build_unit_cell_grid(square(), 16);
  auto spec = compute_inclusion_spectrum(grid, square(), CoefficientField::identity(2), 4);
  const auto csv = inclusion_spectrum_csv_rows(spec);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(spec.size()));
  EXPECT_NE(csv.find("nonzero_mean"), std::string::npos);
}
