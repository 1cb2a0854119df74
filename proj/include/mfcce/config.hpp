#pragma once

// Run configuration for the command-line front end: JSON schema, validation
// with field diagnostics, and the `#` header line embedded in every output.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfcce/analytic_example.hpp"

namespace mfcce {

/// Invalid configuration. `field` names the offending key; `line` is set for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(field, message, line)), field_(field), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& message, std::optional<std::size_t> line) {
    std::string s = "config";
    if (line) s += " line " + std::to_string(*line);
    if (!field.empty()) s += " field '" + field + "'";
    return s + ": " + message;
  }
  std::string field_;
  std::optional<std::size_t> line_;
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c{"region", "gap", "mfgap", "poc", "consistency", "mkv"};
  return c;
}

struct RunConfig {
  std::string command = "region";
  double a = -1.0, b = 1.0, c = 1.0, T = 2.0;
  std::array<double, 4> p{1.0, 0.0, 0.0, 0.0};  // p11, p12, p21, p22
  int resolution = 101;
  std::vector<double> alphas = example::default_alphas();
  std::vector<std::size_t> Ns{50, 200, 500};
  std::size_t reps = 2000;
  std::size_t steps = 200;
  std::size_t G = 21;
  std::uint64_t seed = 1;
  std::size_t particles = 10000;
  std::size_t max_iters = 10;
  double tol = 0.05;
  std::optional<double> action;  // mkv constant action; b when absent
  std::string out = "out.csv";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  example::DeviceProbs device() const { return {p[0], p[1], p[2], p[3]}; }

  void validate() const {
    auto fail = [](const std::string& f, const std::string& m) { throw ConfigError(f, m); };
    if (std::find(known_commands().begin(), known_commands().end(), command) == known_commands().end())
      fail("command", "unknown command '" + command + "'");
    if (!(a < 0.0)) fail("a", "must be < 0");
    if (!(b > 0.0)) fail("b", "must be > 0");
    if (!(c > 0.0)) fail("c", "must be > 0");
    if (!(T > 0.0)) fail("T", "must be > 0");
    try {
      device().validate();
    } catch (const std::invalid_argument& e) {
      fail("p", e.what());
    }
    if (resolution < 2) fail("resolution", "must be >= 2");
    if (alphas.empty()) fail("alpha", "must not be empty");
    for (double al : alphas)
      if (!(al >= 0.0 && al <= 1.0)) fail("alpha", "values must lie in [0,1]");
    if (Ns.empty()) fail("N", "must not be empty");
    for (std::size_t i = 0; i < Ns.size(); ++i) {
      if (Ns[i] < 2) fail("N", "values must be >= 2");
      if (i > 0 && Ns[i] <= Ns[i - 1]) fail("N", "values must be strictly increasing");
    }
    if (reps < 1) fail("reps", "must be >= 1");
    if (steps < 1) fail("steps", "must be >= 1");
    if (G < 3) fail("G", "must be >= 3");
    if (particles < 100) fail("particles", "must be >= 100");
    if (max_iters < 1) fail("max_iters", "must be >= 1");
    if (!(tol > 0.0)) fail("tol", "must be > 0");
    if (action && !(*action >= a && *action <= b)) fail("action", "must lie in [a,b]");
    if (out.empty()) fail("out", "must not be empty");
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = c.command;
  j["a"] = c.a;
  j["b"] = c.b;
  j["c"] = c.c;
  j["T"] = c.T;
  j["p"] = c.p;
  j["resolution"] = c.resolution;
  j["alpha"] = c.alphas;
  j["N"] = c.Ns;
  j["reps"] = c.reps;
  j["steps"] = c.steps;
  j["G"] = c.G;
  j["seed"] = c.seed;
  j["particles"] = c.particles;
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["action"] = c.action ? nlohmann::ordered_json(*c.action) : nlohmann::ordered_json(nullptr);
  j["out"] = c.out;
  return j;
}

namespace detail {

template <class T>
T field_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, std::string("wrong type (") + j.at(key).type_name() + ")");
  }
}

inline double number_field(const nlohmann::json& j, const std::string& key) {
  if (!j.at(key).is_number()) throw ConfigError(key, std::string("expected a number, got ") + j.at(key).type_name());
  return j.at(key).get<double>();
}

inline std::uint64_t count_field(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(key, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

/// Builds a config from a JSON object. Missing keys keep their defaults;
/// unknown keys are rejected.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "top level must be a JSON object");
  static const std::vector<std::string> keys{"command", "a",     "b",         "c",         "T",   "p",
                                             "resolution", "alpha", "N",     "reps",      "steps",     "G",
                                             "seed",    "particles", "max_iters", "tol", "action", "out"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError(k, "unknown field");
  RunConfig c;
  using detail::count_field;
  using detail::number_field;
  if (j.contains("command")) c.command = detail::field_as<std::string>(j, "command");
  if (j.contains("a")) c.a = number_field(j, "a");
  if (j.contains("b")) c.b = number_field(j, "b");
  if (j.contains("c")) c.c = number_field(j, "c");
  if (j.contains("T")) c.T = number_field(j, "T");
  if (j.contains("p")) {
    const auto& v = j.at("p");
    if (!v.is_array() || v.size() != 4) throw ConfigError("p", "expected an array of 4 probabilities");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v[i].is_number()) throw ConfigError("p", "entries must be numbers");
      c.p[i] = v[i].get<double>();
    }
  }
  if (j.contains("resolution")) c.resolution = static_cast<int>(count_field(j, "resolution"));
  if (j.contains("alpha")) {
    const auto& v = j.at("alpha");
    c.alphas.clear();
    if (v.is_number()) {
      c.alphas.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("alpha", "entries must be numbers");
        c.alphas.push_back(e.get<double>());
      }
    } else {
      throw ConfigError("alpha", "expected a number or an array of numbers");
    }
  }
  if (j.contains("N")) {
    const auto& v = j.at("N");
    c.Ns.clear();
    if (v.is_number_unsigned()) {
      c.Ns.push_back(v.get<std::size_t>());
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number_unsigned()) throw ConfigError("N", "entries must be positive integers");
        c.Ns.push_back(e.get<std::size_t>());
      }
    } else {
      throw ConfigError("N", "expected an integer or an array of integers");
    }
  }
  if (j.contains("reps")) c.reps = count_field(j, "reps");
  if (j.contains("steps")) c.steps = count_field(j, "steps");
  if (j.contains("G")) c.G = count_field(j, "G");
  if (j.contains("seed")) c.seed = count_field(j, "seed");
  if (j.contains("particles")) c.particles = count_field(j, "particles");
  if (j.contains("max_iters")) c.max_iters = count_field(j, "max_iters");
  if (j.contains("tol")) c.tol = number_field(j, "tol");
  if (j.contains("action") && !j.at("action").is_null()) c.action = number_field(j, "action");
  if (j.contains("out")) c.out = detail::field_as<std::string>(j, "out");
  c.validate();
  return c;
}

/// Parses a JSON config, or the first `#` comment line of an output file.
inline RunConfig parse_config_text(const std::string& text) {
  std::string body = text;
  std::size_t line_offset = 0;
  {
    std::istringstream is(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
      ++n;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (line[first] == '#') {
        body = line.substr(first + 1);
        line_offset = n - 1;
        break;
      }
      if (line[first] == '{') break;
    }
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    // Recover the line number of the byte offset.
    const std::size_t pos = std::min<std::size_t>(e.byte, body.size());
    const std::size_t line = line_offset + 1 + static_cast<std::size_t>(std::count(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
    throw ConfigError("", std::string("syntax error: ") + e.what(), line);
  }
  return config_from_json(j);
}

/// Single-line JSON used in output headers.
inline std::string header_json(const RunConfig& c) { return to_json(c).dump(); }

}  // namespace mfcce
