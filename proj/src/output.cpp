#include "homoglab/output.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "homoglab/errors.hpp"

namespace homoglab {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

const std::vector<std::pair<std::string, std::string>>& module_versions() {
  static const std::vector<std::pair<std::string, std::string>> v = {
      {"geometry_lattice", "1.0"},    {"coefficients", "1.0"},   {"fem_core", "1.0"},
      {"eigensolve", "1.0"},          {"cell_homogenization", "1.0"}, {"inclusion_spectrum", "1.0"},
      {"unfolding", "1.0"},           {"limit_spectrum", "1.0"}, {"experiments_cli", "1.0"},
  };
  return v;
}

OutputHeader make_header(const ExperimentConfig& cfg, const std::string& command) {
  OutputHeader h;
  h.command = command;
  auto canonical = cfg.canonical.is_null() ? to_json(cfg) : cfg.canonical;
  // Where results go and whether runtimes are kept do not change them.
  canonical.erase("output");
  h.config_hash = hex64(fnv1a64(canonical.dump()));
  h.seed = cfg.seed;
  h.tolerances = {{"eigen", cfg.eigen_tolerance}, {"linear", cfg.linear_tolerance}, {"mean", 1e-8}};
  return h;
}

std::string csv_header_block(const OutputHeader& h) {
  std::ostringstream os;
  os << "# command: " << h.command << "\n";
  os << "# config_hash: " << h.config_hash << "\n";
  os << "# seed: 0x" << std::hex << h.seed << std::dec << "\n";
  os << "# modules:";
  for (const auto& [name, version] : module_versions()) os << " " << name << "=" << version;
  os << "\n# tolerances: " << h.tolerances.dump() << "\n";
  return os.str();
}

nlohmann::json header_json(const OutputHeader& h) {
  nlohmann::json modules = nlohmann::json::object();
  for (const auto& [name, version] : module_versions()) modules[name] = version;
  return {{"command", h.command},
          {"config_hash", h.config_hash},
          {"seed", "0x" + hex64(h.seed)},
          {"modules", modules},
          {"tolerances", h.tolerances}};
}

OutputWriter::OutputWriter(std::filesystem::path dir, OutputHeader header)
    : dir_(std::move(dir)), header_(std::move(header)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

std::filesystem::path OutputWriter::write_csv(const std::string& name, const std::string& body) {
  return write_file(name, csv_header_block(header_) + body);
}

std::filesystem::path OutputWriter::write_json(const std::string& name, nlohmann::json body) {
  if (!body.is_object()) body = {{"data", std::move(body)}};
  body["header"] = header_json(header_);
  return write_file(name, body.dump(2) + "\n");
}

std::vector<std::filesystem::path> OutputWriter::written() const {
  std::lock_guard lock(mutex_);
  return written_;
}

std::filesystem::path OutputWriter::write_file(const std::string& name, const std::string& text) {
  std::lock_guard lock(mutex_);
  const auto path = dir_ / name;
  const auto tmp = dir_ / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw ValidationError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
  written_.push_back(path);
  return path;
}

}  // namespace homoglab
