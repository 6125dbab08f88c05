#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "homoglab/config.hpp"

namespace homoglab {

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

/// Module name → version string, written into every output header.
const std::vector<std::pair<std::string, std::string>>& module_versions();

/// Provenance block shared by all files of one run. Nothing time-dependent
/// goes in, so identical configs give identical bytes.
struct OutputHeader {
  std::string command;
  std::string config_hash;  ///< fnv1a64 of the canonical config dump
  std::uint64_t seed = 0;
  nlohmann::json tolerances;
};

OutputHeader make_header(const ExperimentConfig& cfg, const std::string& command);

/// `# key: value` lines.
std::string csv_header_block(const OutputHeader& h);
nlohmann::json header_json(const OutputHeader& h);

/// Single writer for a run directory. Calls from several threads are
/// serialized; each file is written to a temporary and renamed into place.
class OutputWriter {
 public:
  OutputWriter(std::filesystem::path dir, OutputHeader header);

  std::filesystem::path write_csv(const std::string& name, const std::string& body);
  /// Adds a "header" member to the object.
  std::filesystem::path write_json(const std::string& name, nlohmann::json body);

  const std::filesystem::path& directory() const { return dir_; }
  std::vector<std::filesystem::path> written() const;

 private:
  std::filesystem::path write_file(const std::string& name, const std::string& text);

  std::filesystem::path dir_;
  OutputHeader header_;
  mutable std::mutex mutex_;
  std::vector<std::filesystem::path> written_;
};

}  // namespace homoglab
