#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homoglab/coefficients.hpp"
#include "homoglab/eigensolve.hpp"
#include "homoglab/geometry.hpp"

namespace homoglab {

/// Parses the TOML subset used by experiment files: [section] and
/// [section.sub] headers, `key = value` with strings, integers (decimal or
/// 0x hex), floats, booleans and single-line arrays of those, and # comments.
/// Errors carry the line number.
nlohmann::json parse_toml_subset(const std::string& text);

struct ContrastLaw {
  enum class Kind { fixed, power };
  Kind kind = Kind::fixed;
  double delta = 1.0;  ///< fixed law
  double power = 2.0;  ///< δ = scale·ε^p
  double scale = 1.0;

  double delta_at(double epsilon) const;
};

struct ExperimentConfig {
  // [geometry]: a box inclusion; `side` gives a centred square/cube.
  int dim = 2;
  std::vector<double> lower = {0.25, 0.25};
  std::vector<double> upper = {0.75, 0.75};

  // [coefficient]
  std::string coefficient = "identity";  ///< identity | layered | checkerboard | block_diagonal | csv
  double low = 1.0;
  double high = 1.0;
  double smoothing = 0.0;
  int axis = 0;
  std::vector<double> scales;
  std::string csv_path;
  int components = 1;
  double holder_exponent = 1.0;  ///< csv only: declared regularity

  // [contrast]
  ContrastLaw contrast;

  // [discretization]
  std::vector<int> ns = {4, 8, 16};  ///< ε = 1/n
  int subcells = 8;                  ///< M
  int cell_resolution = 32;          ///< unit-cell grid for cell/inclusion/limit

  // [eigen]
  int count = 6;
  int inclusion_modes = 40;
  EigenMethod method = EigenMethod::shift_invert;
  double eigen_tolerance = 1e-8;
  double linear_tolerance = 1e-11;

  // [regimes]
  std::vector<double> regime_powers = {1, 2, 3};
  int regime_n = 16;
  double perforated_delta = 1e-6;  ///< stands in for δ = 0 in Â₀

  // [unfolding]
  std::vector<int> unfold_ns = {4, 8, 16, 32};
  int unfold_subcells = 8;
  int unfold_max_frequency = 2;

  // [oracle]
  int oracle_n = 2;
  int oracle_resolution = 8;
  double oracle_kappa = 1.0;

  // [output]
  std::string output_dir = "out";
  bool timings = false;

  std::uint64_t seed = kDefaultSeed;

  /// Parsed document with defaults filled in; hashed into output headers.
  nlohmann::json canonical;

  PeriodicGeometry geometry() const;
  CoefficientField coefficient_field() const;
};

/// Builds a validated config from a parsed document. Unknown sections or
/// keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig parse_config(const std::string& text);
/// Throws ValidationError naming the path when the file cannot be read.
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace homoglab
