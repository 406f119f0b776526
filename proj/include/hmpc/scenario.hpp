#pragma once

#include "hmpc/simulator.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace hmpc {

inline constexpr int kScenarioSchemaVersion = 1;

/// Problem in a scenario document. `line` is 1-based (0 when unknown) and
/// `path` is the JSON pointer of the offending value.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string source, int line, std::string path, const std::string& message);

  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& path() const { return path_; }
  const std::string& message() const { return message_; }

 private:
  std::string source_;
  int line_;
  std::string path_;
  std::string message_;
};

/// Parses and validates a scenario document. Unknown keys, wrong types and
/// model inconsistencies are all reported as ScenarioError. Machines are
/// numbered from 1 in the document and from 0 in ScenarioConfig.
ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<scenario>");
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Serializes every field; parse_scenario(scenario_to_json(s)) reproduces s.
std::string scenario_to_json(const ScenarioConfig& scenario);
void save_scenario(const ScenarioConfig& scenario, const std::filesystem::path& path);

/// The seven-machine battery-pack line with synthetic peak/off-peak prices.
ScenarioConfig battery_line_scenario();

/// Line number (1-based) of the value at a JSON pointer inside `text`, or 0
/// when the pointer does not resolve.
int locate_json_pointer(const std::string& text, const std::string& pointer);

}  // namespace hmpc
