#pragma once

#include <cstdint>
#include <string>

#include "rgd/markovian.hpp"

namespace rgd {

enum class OutputFormat { Csv, Json };

struct Numerics {
  int space_nodes = 400;
  int time_steps = 400;
  int control_points = 20;  // per Loewner axis
  int n_paths = 100000;
  int n_steps = 50;
  std::uint64_t seed = 20240917;
  double mc_threshold = 3.0;
  double hedge_multiplier = 1.0;  // test hook, 2 breaks the hedge
  double pde_tolerance = 1e-3;
};

struct OutputSpec {
  std::string dir;  // empty writes to stdout
  OutputFormat format = OutputFormat::Csv;
};

/// Flat text: one `section.key = value` per line, `#` starts a comment.
struct ScenarioConfig {
  PutScenario put;
  Numerics numerics;
  OutputSpec output;
};

/// Throws ConfigError on unknown or repeated keys and unparsable values. Does
/// not validate the market, see check_config.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

/// Every key in a fixed order, doubles in shortest round-trip form, so
/// parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const ScenarioConfig& c);

/// FNV-1a over the serialized market, put and numerics keys, as 16 hex
/// digits. Output settings do not enter.
std::string config_hash(const ScenarioConfig& c);

/// Scenario invariants plus numerics ranges; throws with the violated condition.
void check_config(const ScenarioConfig& c);

std::string to_string(OutputFormat f);

}  // namespace rgd
