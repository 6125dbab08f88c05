#include "homoglab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "homoglab/errors.hpp"

namespace homoglab {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw ValidationError("config line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Removes a trailing comment, leaving # inside strings alone.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && in_string) {
      ++i;
      continue;
    }
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  nlohmann::json parse() {
    auto v = value();
    skip_ws();
    if (pos_ != s_.size()) fail(line_, "unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  nlohmann::json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  nlohmann::json string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail(line_, "unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json array() {
    ++pos_;
    auto out = nlohmann::json::array();
    for (;;) {
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail(line_, "malformed array");
    }
  }

  nlohmann::json number() {
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    std::string clean;
    for (char c : tok)
      if (c != '_') clean += c;
    if (clean.empty()) fail(line_, "missing value");
    try {
      std::size_t used = 0;
      if (clean.rfind("0x", 0) == 0 || clean.rfind("0X", 0) == 0) {
        const auto v = std::stoull(clean.substr(2), &used, 16);
        if (used + 2 != clean.size()) throw std::invalid_argument(tok);
        return static_cast<std::uint64_t>(v);
      }
      if (clean.find_first_of(".eE") == std::string::npos) {
        const auto v = std::stoll(clean, &used, 10);
        if (used != clean.size()) throw std::invalid_argument(tok);
        return static_cast<std::int64_t>(v);
      }
      const double v = std::stod(clean, &used);
      if (used != clean.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
      return v;
    } catch (const std::logic_error&) {
      fail(line_, "cannot parse value '" + tok + "'");
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

// Typed access to one section with unknown-key detection.
class Section {
 public:
  Section(const nlohmann::json& doc, const std::string& name, std::set<std::string> allowed)
      : name_(name), allowed_(std::move(allowed)) {
    if (doc.contains(name)) {
      node_ = doc.at(name);
      if (!node_.is_object()) throw ValidationError("[" + name + "] must be a table");
      for (const auto& [k, v] : node_.items())
        if (!allowed_.count(k)) throw ValidationError("unknown key '" + k + "' in [" + name + "]");
    }
  }

  bool has(const std::string& key) const { return node_.is_object() && node_.contains(key); }

  template <class T>
  T get(const std::string& key, const T& fallback) const {
    if (!has(key)) return fallback;
    try {
      return node_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("[" + name_ + "] " + key + " has the wrong type");
    }
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number()) throw ValidationError("[" + name_ + "] " + key + " must be a number");
    return v.get<double>();
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_array()) throw ValidationError("[" + name_ + "] " + key + " must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ValidationError("[" + name_ + "] " + key + " must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> ints(const std::string& key, const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_array()) throw ValidationError("[" + name_ + "] " + key + " must be an array");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ValidationError("[" + name_ + "] " + key + " must hold integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

 private:
  std::string name_;
  std::set<std::string> allowed_;
  nlohmann::json node_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::vector<int> ns_from_epsilons(const std::vector<double>& eps) {
  std::vector<int> out;
  for (double e : eps) {
    require(e > 0.0 && e <= 1.0, "ε values must lie in (0, 1]");
    const double inv = 1.0 / e;
    const auto n = std::llround(inv);
    if (std::abs(inv - static_cast<double>(n)) > 1e-9 * inv)
      throw ValidationError("ε = " + std::to_string(e) + " is not of the form 1/n");
    out.push_back(static_cast<int>(n));
  }
  return out;
}

}  // namespace

nlohmann::json parse_toml_subset(const std::string& text) {
  nlohmann::json doc = nlohmann::json::object();
  nlohmann::json::json_pointer current("");
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::set<std::string> headers;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail(line, "malformed section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (!headers.insert(name).second) fail(line, "duplicate section [" + name + "]");
      std::string ptr;
      std::stringstream parts(name);
      std::string part;
      while (std::getline(parts, part, '.')) {
        part = trim(part);
        if (!bare_key(part)) fail(line, "invalid section name '" + name + "'");
        ptr += "/" + part;
      }
      current = nlohmann::json::json_pointer(ptr);
      if (doc.contains(current) && !doc[current].is_object()) fail(line, "section clashes with a key");
      if (!doc.contains(current)) doc[current] = nlohmann::json::object();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!bare_key(key)) fail(line, "invalid key '" + key + "'");
    auto& table = doc[current];
    if (table.contains(key)) fail(line, "duplicate key '" + key + "'");
    table[key] = ValueParser(trim(s.substr(eq + 1)), line).parse();
  }
  return doc;
}

double ContrastLaw::delta_at(double epsilon) const {
  return kind == Kind::fixed ? delta : scale * std::pow(epsilon, power);
}

PeriodicGeometry ExperimentConfig::geometry() const { return PeriodicGeometry::box(lower, upper); }

CoefficientField ExperimentConfig::coefficient_field() const {
  if (coefficient == "identity") return CoefficientField::identity(dim, components);
  if (coefficient == "layered") return CoefficientField::layered(dim, low, high, smoothing, axis);
  if (coefficient == "checkerboard") return CoefficientField::checkerboard(dim, low, high, smoothing);
  if (coefficient == "block_diagonal") return CoefficientField::block_diagonal(dim, scales);
  if (coefficient == "csv") return load_coefficient_csv(csv_path, dim, components, holder_exponent);
  throw ValidationError("unknown coefficient kind '" + coefficient + "'");
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  static const std::set<std::string> sections = {"geometry", "coefficient", "contrast", "discretization", "eigen",
                                                 "regimes",  "unfolding",   "oracle",   "output",         "seed"};
  require(doc.is_object(), "config must be a table");
  for (const auto& [k, v] : doc.items())
    if (!sections.count(k)) throw ValidationError("unknown section or key '" + k + "'");

  ExperimentConfig cfg;
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (s.is_number_unsigned() || s.is_number_integer()) {
      cfg.seed = s.get<std::uint64_t>();
    } else if (s.is_string()) {
      try {
        cfg.seed = std::stoull(s.get<std::string>(), nullptr, 0);
      } catch (const std::logic_error&) {
        throw ValidationError("seed must be an integer");
      }
    } else {
      throw ValidationError("seed must be an integer");
    }
  }

  const Section geo(doc, "geometry", {"dim", "side", "lower", "upper"});
  cfg.dim = geo.get<int>("dim", 2);
  require(cfg.dim >= 1 && cfg.dim <= kMaxDim, "[geometry] dim must be 1, 2 or 3");
  if (geo.has("side")) {
    require(!geo.has("lower") && !geo.has("upper"), "[geometry] give either side or lower/upper");
    const double side = geo.real("side", 0.5);
    require(side > 0.0 && side < 1.0, "[geometry] side must lie in (0, 1)");
    cfg.lower.assign(static_cast<std::size_t>(cfg.dim), 0.5 - side / 2);
    cfg.upper.assign(static_cast<std::size_t>(cfg.dim), 0.5 + side / 2);
  } else {
    cfg.lower = geo.reals("lower", std::vector<double>(static_cast<std::size_t>(cfg.dim), 0.25));
    cfg.upper = geo.reals("upper", std::vector<double>(static_cast<std::size_t>(cfg.dim), 0.75));
  }
  (void)cfg.geometry();  // validates the box

  const Section co(doc, "coefficient", {"kind", "low", "high", "smoothing", "axis", "scales", "path", "components", "holder_exponent"});
  cfg.coefficient = co.get<std::string>("kind", "identity");
  cfg.low = co.real("low", 1.0);
  cfg.high = co.real("high", 1.0);
  cfg.smoothing = co.real("smoothing", 0.0);
  cfg.axis = co.get<int>("axis", 0);
  cfg.scales = co.reals("scales", {});
  cfg.csv_path = co.get<std::string>("path", "");
  cfg.components = co.get<int>("components", 1);
  cfg.holder_exponent = co.real("holder_exponent", 1.0);
  require(cfg.holder_exponent > 0.0 && cfg.holder_exponent <= 1.0, "[coefficient] holder_exponent must lie in (0, 1]");
  if (cfg.coefficient == "block_diagonal") cfg.components = static_cast<int>(cfg.scales.size());
  require(cfg.components >= 1, "[coefficient] components must be positive");
  if (cfg.coefficient != "csv") (void)cfg.coefficient_field();

  const Section ct(doc, "contrast", {"law", "delta", "p", "scale"});
  const auto law = ct.get<std::string>("law", "fixed");
  if (law == "fixed") {
    cfg.contrast.kind = ContrastLaw::Kind::fixed;
  } else if (law == "power") {
    cfg.contrast.kind = ContrastLaw::Kind::power;
  } else {
    throw ValidationError("[contrast] law must be \"fixed\" or \"power\"");
  }
  cfg.contrast.delta = ct.real("delta", 1.0);
  cfg.contrast.power = ct.real("p", 2.0);
  cfg.contrast.scale = ct.real("scale", 1.0);
  require(cfg.contrast.delta > 0.0, "[contrast] delta must be positive");
  require(cfg.contrast.scale > 0.0, "[contrast] scale must be positive");
  require(cfg.contrast.power >= 0.0 && cfg.contrast.power <= 4.0, "[contrast] p must lie in [0, 4]");

  const Section di(doc, "discretization", {"n", "epsilon", "subcells", "cell_resolution"});
  require(!(di.has("n") && di.has("epsilon")), "[discretization] give either n or epsilon");
  cfg.ns = di.has("epsilon") ? ns_from_epsilons(di.reals("epsilon", {})) : di.ints("n", cfg.ns);
  require(!cfg.ns.empty(), "[discretization] needs at least one ε");
  for (int n : cfg.ns) require(n >= 1, "[discretization] n must be positive");
  cfg.subcells = di.get<int>("subcells", cfg.subcells);
  cfg.cell_resolution = di.get<int>("cell_resolution", cfg.cell_resolution);
  require(cfg.subcells >= 2 && cfg.cell_resolution >= 2, "[discretization] resolutions must be at least 2");
  const auto geom = cfg.geometry();
  if (!resolution_compatible(geom, cfg.subcells))
    throw IncompatibleResolution(cfg.subcells, smallest_compatible_resolution(geom));
  if (!resolution_compatible(geom, cfg.cell_resolution))
    throw IncompatibleResolution(cfg.cell_resolution, smallest_compatible_resolution(geom));

  const Section ei(doc, "eigen", {"count", "inclusion_modes", "method", "tolerance", "linear_tolerance"});
  cfg.count = ei.get<int>("count", cfg.count);
  cfg.inclusion_modes = ei.get<int>("inclusion_modes", cfg.inclusion_modes);
  cfg.method = parse_eigen_method(ei.get<std::string>("method", to_string(cfg.method)));
  cfg.eigen_tolerance = ei.real("tolerance", cfg.eigen_tolerance);
  cfg.linear_tolerance = ei.real("linear_tolerance", cfg.linear_tolerance);
  require(cfg.count >= 1, "[eigen] count must be positive");
  require(cfg.inclusion_modes >= 4, "[eigen] inclusion_modes must be at least 4");
  require(cfg.eigen_tolerance > 0.0 && cfg.linear_tolerance > 0.0, "[eigen] tolerances must be positive");

  const Section re(doc, "regimes", {"p", "n", "perforated_delta"});
  cfg.regime_powers = re.reals("p", cfg.regime_powers);
  cfg.regime_n = re.get<int>("n", cfg.regime_n);
  cfg.perforated_delta = re.real("perforated_delta", cfg.perforated_delta);
  for (double p : cfg.regime_powers) require(p >= 0.0 && p <= 4.0, "[regimes] p must lie in [0, 4]");
  require(cfg.regime_n >= 1, "[regimes] n must be positive");
  require(cfg.perforated_delta > 0.0, "[regimes] perforated_delta must be positive");

  const Section un(doc, "unfolding", {"n", "subcells", "max_frequency"});
  cfg.unfold_ns = un.ints("n", cfg.unfold_ns);
  cfg.unfold_subcells = un.get<int>("subcells", cfg.unfold_subcells);
  cfg.unfold_max_frequency = un.get<int>("max_frequency", cfg.unfold_max_frequency);
  require(!cfg.unfold_ns.empty(), "[unfolding] needs at least one n");
  for (int n : cfg.unfold_ns) require(n >= 1, "[unfolding] n must be positive");
  require(cfg.unfold_subcells >= 1 && cfg.unfold_max_frequency >= 1, "[unfolding] invalid subcells or frequency");

  const Section orc(doc, "oracle", {"n", "cell_resolution", "kappa"});
  cfg.oracle_n = orc.get<int>("n", cfg.oracle_n);
  cfg.oracle_resolution = orc.get<int>("cell_resolution", cfg.oracle_resolution);
  cfg.oracle_kappa = orc.real("kappa", cfg.oracle_kappa);
  require(cfg.oracle_n >= 1 && cfg.oracle_resolution >= 2, "[oracle] invalid n or resolution");
  require(cfg.oracle_kappa > 0.0, "[oracle] kappa must be positive");

  const Section out(doc, "output", {"directory", "timings"});
  cfg.output_dir = out.get<std::string>("directory", cfg.output_dir);
  cfg.timings = out.get<bool>("timings", cfg.timings);

  cfg.canonical = to_json(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& text) { return config_from_json(parse_toml_subset(text)); }

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["geometry"] = {{"dim", c.dim}, {"lower", c.lower}, {"upper", c.upper}};
  j["coefficient"] = {{"kind", c.coefficient}, {"low", c.low},       {"high", c.high},
                      {"smoothing", c.smoothing}, {"axis", c.axis}, {"scales", c.scales},
                      {"path", c.csv_path},       {"components", c.components},
                      {"holder_exponent", c.holder_exponent}};
  j["contrast"] = {{"law", c.contrast.kind == ContrastLaw::Kind::fixed ? "fixed" : "power"},
                   {"delta", c.contrast.delta},
                   {"p", c.contrast.power},
                   {"scale", c.contrast.scale}};
  j["discretization"] = {{"n", c.ns}, {"subcells", c.subcells}, {"cell_resolution", c.cell_resolution}};
  j["eigen"] = {{"count", c.count},
                {"inclusion_modes", c.inclusion_modes},
                {"method", to_string(c.method)},
                {"tolerance", c.eigen_tolerance},
                {"linear_tolerance", c.linear_tolerance}};
  j["regimes"] = {{"p", c.regime_powers}, {"n", c.regime_n}, {"perforated_delta", c.perforated_delta}};
  j["unfolding"] = {{"n", c.unfold_ns}, {"subcells", c.unfold_subcells}, {"max_frequency", c.unfold_max_frequency}};
  j["oracle"] = {{"n", c.oracle_n}, {"cell_resolution", c.oracle_resolution}, {"kappa", c.oracle_kappa}};
  j["output"] = {{"directory", c.output_dir}, {"timings", c.timings}};
  j["seed"] = c.seed;
  return j;
}

}  // namespace homoglab
