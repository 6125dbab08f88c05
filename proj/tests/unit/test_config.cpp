#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "homoglab/config.hpp"
#include "homoglab/errors.hpp"

using namespace homoglab;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(TomlSubset, ScalarsArraysAndSections) {
  const auto j = parse_toml_subset(R"(
top = 3  # trailing comment
[a]
s = "x # not a comment"
f = 1.5e-3
i = -42
h = 0xff
b = true
arr = [1, 2.5, "t", false,]
[a.c]
big = 1_000
)");
  EXPECT_EQ(j["top"], 3);
  EXPECT_EQ(j["a"]["s"], "x # not a comment");
  EXPECT_DOUBLE_EQ(j["a"]["f"].get<double>(), 1.5e-3);
  EXPECT_EQ(j["a"]["i"], -42);
  EXPECT_EQ(j["a"]["h"], 255);
  EXPECT_EQ(j["a"]["b"], true);
  ASSERT_EQ(j["a"]["arr"].size(), 4u);
  EXPECT_EQ(j["a"]["arr"][2], "t");
  EXPECT_EQ(j["a"]["c"]["big"], 1000);
}

TEST(TomlSubset, DottedSectionNestsUnderParent) {
  const auto j = parse_toml_subset("[x.y]\nk = 1\n");
  EXPECT_EQ(j["x"]["y"]["k"], 1);
}

TEST(TomlSubset, ErrorsCarryLineNumbers) {
  auto msg = [](const std::string& text) {
    try {
      parse_toml_subset(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(msg("a = 1\na = 2\n").find("line 2"), std::string::npos);
  EXPECT_NE(msg("[s]\n\nkey\n").find("line 3"), std::string::npos);
  EXPECT_NE(msg("k = \"open\n").find("unterminated"), std::string::npos);
  EXPECT_NE(msg("k = 1.2.3\n").find("cannot parse"), std::string::npos);
  EXPECT_NE(msg("[s]\n[s]\n").find("duplicate section"), std::string::npos);
  EXPECT_NE(msg("k = [1, 2\n").find("malformed array"), std::string::npos);
  EXPECT_NE(msg("[a]\nb = 1\n[a.b]\n").find("clashes"), std::string::npos);
}

TEST(ExperimentConfig, DefaultsAreValid) {
  const auto cfg = parse_config("");
  EXPECT_EQ(cfg.dim, 2);
  EXPECT_EQ(cfg.ns, (std::vector<int>{4, 8, 16}));
  EXPECT_EQ(cfg.seed, kDefaultSeed);
  EXPECT_NEAR(cfg.geometry().theta(), 0.25, 1e-12);
  EXPECT_FALSE(cfg.canonical.is_null());
}

TEST(ExperimentConfig, EpsilonListBecomesN) {
  const auto cfg = parse_config("[discretization]\nepsilon = [0.25, 0.125, 0.0625]\n");
  EXPECT_EQ(cfg.ns, (std::vector<int>{4, 8, 16}));
  EXPECT_NE(error_of("[discretization]\nepsilon = [0.3]\n").find("1/n"), std::string::npos);
  EXPECT_NE(error_of("[discretization]\nepsilon = [0.5]\nn = [2]\n").find("either"), std::string::npos);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndSections) {
  EXPECT_NE(error_of("[geometry]\nradius = 1\n").find("radius"), std::string::npos);
  EXPECT_NE(error_of("[solver]\nx = 1\n").find("solver"), std::string::npos);
}

TEST(ExperimentConfig, ContrastLawsGivePositiveDelta) {
  const auto fixed = parse_config("[contrast]\ndelta = 0.3\n");
  EXPECT_DOUBLE_EQ(fixed.contrast.delta_at(0.125), 0.3);
  const auto power = parse_config("[contrast]\nlaw = \"power\"\np = 3\nscale = 2\n");
  EXPECT_DOUBLE_EQ(power.contrast.delta_at(0.5), 0.25);
  EXPECT_FALSE(error_of("[contrast]\ndelta = 0\n").empty());
  EXPECT_FALSE(error_of("[contrast]\nlaw = \"power\"\np = 5\n").empty());
  EXPECT_FALSE(error_of("[contrast]\nlaw = \"exp\"\n").empty());
}

TEST(ExperimentConfig, IncompatibleResolutionSuggestsAlternative) {
  // Box edges at 0.25 and 0.75 need a multiple of 4 cells per axis.
  EXPECT_THROW(parse_config("[discretization]\nsubcells = 6\n"), IncompatibleResolution);
  EXPECT_NO_THROW(parse_config("[discretization]\nsubcells = 12\n"));
}

TEST(ExperimentConfig, SeedAcceptsHexIntegerAndString) {
  EXPECT_EQ(parse_config("seed = 0x10\n").seed, 16u);
  EXPECT_EQ(parse_config("seed = \"0x20\"\n").seed, 32u);
  EXPECT_FALSE(error_of("seed = 1.5\n").empty());
}

TEST(ExperimentConfig, MissingFileNamesPath) {
  try {
    load_config("/nonexistent/dir/exp.toml");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/exp.toml"), std::string::npos);
  }
}

TEST(ExperimentConfig, CoefficientKinds) {
  const auto layered = parse_config("[coefficient]\nkind = \"layered\"\nlow = 1\nhigh = 4\n");
  const auto a = layered.coefficient_field();
  EXPECT_EQ(a.dim(), 2);
  const auto blocks = parse_config("[coefficient]\nkind = \"block_diagonal\"\nscales = [1.0, 2.0]\n");
  EXPECT_EQ(blocks.components, 2);
  EXPECT_FALSE(error_of("[coefficient]\nkind = \"marble\"\n").empty());
}

// Hand-rolled generator: random valid configs survive to_json → config_from_json
// with an identical canonical document.
TEST(ExperimentConfig, CanonicalRoundTripProperty) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(1, 5);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    std::ostringstream text;
    const int dim = 1 + trial % 3;
    text << "seed = " << rng() % 100000 << "\n[geometry]\ndim = " << dim << "\nside = 0.5\n";
    text << "[contrast]\nlaw = \"" << (trial % 2 ? "power" : "fixed") << "\"\ndelta = " << unit(rng)
         << "\np = " << 4 * unit(rng) << "\n";
    text << "[discretization]\nn = [" << small(rng) << ", " << 2 * small(rng) << "]\nsubcells = " << 4 * small(rng)
         << "\n";
    text << "[eigen]\ncount = " << small(rng) << "\nmethod = \"" << (trial % 3 ? "lobpcg" : "dense") << "\"\n";
    const auto cfg = parse_config(text.str());
    const auto again = config_from_json(to_json(cfg));
    EXPECT_EQ(again.canonical.dump(), cfg.canonical.dump()) << text.str();
    for (int n : cfg.ns) EXPECT_GT(cfg.contrast.delta_at(1.0 / n), 0.0);
  }
}
