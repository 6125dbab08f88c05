#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homoglab/cell_homogenization.hpp"
#include "homoglab/config.hpp"
#include "homoglab/inclusion_spectrum.hpp"
#include "homoglab/limit_spectrum.hpp"

namespace homoglab {

/// Leading eigenvalues of L_{ε,δ}⁻¹ on Ω with ε = 1/n and an n·M fine grid.
struct FineSpectrum {
  int n = 0;
  double delta = 0.0;
  std::size_t dofs = 0;
  std::vector<double> values;  ///< eigenvalues of L_{ε,δ}, ascending
  std::vector<double> inverse; ///< 1/values, decreasing
  int iterations = 0;
  EigenMethod method = EigenMethod::automatic;
  double seconds = 0.0;
};

/// Fine-grid unknowns for ε = 1/n, known before anything is assembled.
std::size_t planned_fine_dofs(const ExperimentConfig& cfg, int n);

/// Throws NumericalError when the solver does not converge.
FineSpectrum fine_spectrum(const ExperimentConfig& cfg, int n, double delta, int count,
                           std::optional<double> shift = std::nullopt);

/// Limit spectrum for ε = 1/n with the unit cell resolved by `y_resolution`
/// cells per axis; θ_j come from L̂_δ on the same fine Ω grid as the fine
/// problem.
struct LimitAtEpsilon {
  int n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  HomogenizedTensor tensor;
  InclusionSpectrum inclusion;
  std::vector<double> thetas;  ///< ascending
  LimitSpectrumReport report;
  /// Smallest η guaranteed to be enumerated: entries below it may be missing
  /// because of the θ or inclusion windows.
  double eta_floor = 0.0;
};

LimitAtEpsilon limit_at_epsilon(const ExperimentConfig& cfg, int n, double delta, int y_resolution, int theta_count);

/// η entries of a report expanded by multiplicity, decreasing, with branches.
struct ExpandedEta {
  std::vector<double> values;
  std::vector<EtaBranch> branches;
};
ExpandedEta expand_eta(const LimitSpectrumReport& report, std::size_t limit);

struct RateRow {
  int n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  bool ok = false;
  std::string error;                 ///< set when a stage failed
  std::vector<double> fine;          ///< λ^i, decreasing
  std::vector<double> eta;           ///< η^i, decreasing
  std::vector<EtaBranch> branches;
  std::vector<double> errors;        ///< |λ^i − η^i| for i < min(k, #η)
  LimitSpectrumReport limit;
  std::size_t fine_dofs = 0;
  int fine_iterations = 0;
  double seconds = 0.0;
};

struct RateReport {
  int count = 0;  ///< k
  std::vector<RateRow> rows;
  std::vector<std::optional<double>> slopes;  ///< per i
  std::optional<double> aggregate_slope;      ///< fit of max_i error per ε
};

/// Fine vs limit eigenvalues per ε with the contrast law of cfg; failures are
/// recorded on their row and the sweep moves on.
RateReport run_theorem1_sweep(const ExperimentConfig& cfg);

/// Minimal relative distance from `value` to any entry of `targets`.
double nearest_relative_gap(double value, const std::vector<double>& targets);

struct RegimeRow {
  double power = 0.0;  ///< δ = ε^p
  int n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  std::string regime;  ///< "homogenized", "critical" or "perforated"
  bool ok = false;
  std::string error;
  std::vector<double> fine;       ///< leading fine eigenvalues of L_{ε,δ}, ascending
  std::vector<double> predicted;  ///< regime prediction in the same scale, ascending
  std::vector<double> gaps;       ///< relative gap of each fine value to the prediction set
  // p < 2: θ₁(Â_δ) against the leading fine value.
  double theta1 = 0.0;
  // p = 2: Bloch cluster near μ_α₁/κ.
  double cluster_target = 0.0;
  std::size_t cluster_expected = 0;  ///< |Π̂_ε| × dimension of the α₁ cluster
  std::size_t cluster_found = 0;     ///< fine values within 5% of the target
  double cluster_lowest = 0.0;       ///< extremes of the expected count of values nearest the target
  double cluster_highest = 0.0;
  double cluster_spread = 0.0;       ///< (highest − lowest)/target
  double seconds = 0.0;
};

struct RegimeReport {
  std::vector<RegimeRow> rows;
};

RegimeReport run_regime_study(const ExperimentConfig& cfg);

/// Dense two-scale oracle against limit_eta at cfg.oracle_*.
struct OracleReport {
  int n = 0;
  int resolution = 0;
  double kappa = 0.0;
  std::size_t predicted = 0;
  std::size_t dimension = 0;
  double max_relative_mismatch = 0.0;
  double max_zero_tail = 0.0;          ///< |value| beyond the predicted count, relative to the largest
  double max_bloch_block_mean = 0.0;
  double min_residual_block_mean = 0.0;
  std::vector<double> oracle_values;   ///< decreasing
  std::vector<double> predicted_values;
};

OracleReport run_oracle_check(const ExperimentConfig& cfg);

std::string rates_csv(const RateReport& r);
/// Slopes and per-ε summaries; runtimes only with `timings`.
nlohmann::json slopes_json(const RateReport& r, bool timings);
/// (x, y, series) rows: |λ^i − η^i| against ε, one series per i plus "max".
std::string rates_plot_csv(const RateReport& r);

std::string regimes_csv(const RegimeReport& r);
nlohmann::json to_json(const RegimeReport& r, bool timings);
nlohmann::json to_json(const OracleReport& r);

}  // namespace homoglab
