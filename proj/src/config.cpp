#include "rgd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <vector>

#include "rgd/errors.hpp"
#include "rgd/format.hpp"

namespace rgd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), ErrorCode::ConfigError,
          key + ": expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), ErrorCode::ConfigError,
          key + ": expected an integer, got '" + v + "'");
  return out;
}

// One entry per key: how to read it into a config and how to print it back.
struct Field {
  const char* key;
  std::function<void(ScenarioConfig&, const std::string&)> read;
  std::function<std::string(const ScenarioConfig&)> write;
};

#define RGD_REAL(name, member)                                                                   \
  Field {                                                                                        \
    name, [](ScenarioConfig& c, const std::string& v) { c.member = parse_double(name, v); },     \
        [](const ScenarioConfig& c) { return format_double(c.member); }                                    \
  }
#define RGD_INT(name, member, type)                                                              \
  Field {                                                                                        \
    name, [](ScenarioConfig& c, const std::string& v) { c.member = parse_int<type>(name, v); },  \
        [](const ScenarioConfig& c) { return std::to_string(c.member); }                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      RGD_REAL("market.sigma_S", put.sigma_S),
      RGD_REAL("market.b", put.b),
      RGD_REAL("market.h", put.h),
      RGD_REAL("market.delta", put.delta),
      RGD_REAL("market.a1_lo", put.a1_lo),
      RGD_REAL("market.a2_lo", put.a2_lo),
      RGD_REAL("market.a1_hi", put.a1_hi),
      RGD_REAL("market.a2_hi", put.a2_hi),
      RGD_REAL("put.S0", put.S0),
      RGD_REAL("put.L0", put.L0),
      RGD_REAL("put.beta", put.beta),
      RGD_REAL("put.rho", put.rho),
      RGD_REAL("put.gamma", put.gamma),
      RGD_REAL("put.strike", put.strike),
      RGD_REAL("put.T", put.T),
      RGD_INT("numerics.space_nodes", numerics.space_nodes, int),
      RGD_INT("numerics.time_steps", numerics.time_steps, int),
      RGD_INT("numerics.control_points", numerics.control_points, int),
      RGD_INT("numerics.n_paths", numerics.n_paths, int),
      RGD_INT("numerics.n_steps", numerics.n_steps, int),
      RGD_INT("numerics.seed", numerics.seed, std::uint64_t),
      RGD_REAL("numerics.mc_threshold", numerics.mc_threshold),
      RGD_REAL("numerics.hedge_multiplier", numerics.hedge_multiplier),
      RGD_REAL("numerics.pde_tolerance", numerics.pde_tolerance),
      Field{"output.dir", [](ScenarioConfig& c, const std::string& v) { c.output.dir = v; },
            [](const ScenarioConfig& c) { return c.output.dir; }},
      Field{"output.format",
            [](ScenarioConfig& c, const std::string& v) {
              if (v == "csv") {
                c.output.format = OutputFormat::Csv;
              } else if (v == "json") {
                c.output.format = OutputFormat::Json;
              } else {
                throw Error(ErrorCode::ConfigError, "output.format: expected csv or json, got '" + v + "'");
              }
            },
            [](const ScenarioConfig& c) { return to_string(c.output.format); }},
  };
  return all;
}

#undef RGD_REAL
#undef RGD_INT

}  // namespace

std::string to_string(OutputFormat f) { return f == OutputFormat::Json ? "json" : "csv"; }

ScenarioConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  ScenarioConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::ConfigError,
            "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    require(it != by_key.end(), ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    require(seen.insert(key).second, ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    it->second->read(c, value);
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::ConfigError, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& c) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.write(c) + "\n";
  return out;
}

std::string config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& f : fields()) {
    if (std::string_view(f.key).starts_with("output.")) continue;
    for (unsigned char ch : std::string(f.key) + " = " + f.write(c) + "\n") {
      h ^= ch;
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_config(const ScenarioConfig& c) {
  check_scenario(c.put);
  const auto& n = c.numerics;
  auto need = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  need(n.space_nodes >= 8 && n.time_steps >= 4, "numerics: need space_nodes >= 8 and time_steps >= 4");
  need(n.control_points >= 2, "numerics.control_points must be at least 2");
  need(n.n_paths >= 2 && n.n_steps >= 5 && n.n_steps % 5 == 0, "numerics: need n_paths >= 2 and n_steps a positive multiple of 5");
  need(n.mc_threshold > 0 && n.pde_tolerance > 0, "numerics: thresholds must be positive");
}

}  // namespace rgd
