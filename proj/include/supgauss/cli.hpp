#pragma once

// Config-driven experiment runner. A run is described by one JSON document;
// outputs (CSV tables, summary.txt, manifest.json) are a deterministic
// function of the config and seed, independent of the thread count.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace supgauss::cli {

struct ConfigError {
  std::size_t line = 0;  // 1-based; 0 when the field is absent from the text
  std::string field;
  std::string message;

  std::string str() const;
};

struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string output_dir = "supgauss_out";
  /// Full config with every default filled in; re-running it reproduces the outputs.
  nlohmann::ordered_json echo;
};

struct ParseResult {
  std::optional<RunConfig> config;
  std::vector<ConfigError> errors;

  bool ok() const { return errors.empty() && config.has_value(); }
};

const std::vector<std::string>& subcommands();

/// Parses and validates config text. A manifest written by a previous run is
/// accepted too; its echoed config is used.
ParseResult validate(std::string_view text);

struct RunOutput {
  std::map<std::string, std::string> files;  // name -> contents, excluding the manifest
  std::string summary;
  bool checks_passed = true;                 // self-test subcommands only
};

/// Runs a validated config without touching the file system. Throws
/// InvalidArgument or NumericalError.
RunOutput execute(const RunConfig& config);

/// Executes and writes the outputs plus manifest.json into `dir`; returns the exit status
/// (0 success, 2 validation failure, 3 numerical failure).
int run(const RunConfig& config, const std::filesystem::path& dir, std::ostream& err);

/// Entry point of the command line tool.
int main(int argc, char** argv);

}  // namespace supgauss::cli
