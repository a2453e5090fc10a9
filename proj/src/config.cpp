#include "capfuse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

double parse_number(std::string_view v, const std::string& where) {
  std::string buf(v);
  buf.erase(std::remove(buf.begin(), buf.end(), '_'), buf.end());
  try {
    std::size_t used = 0;
    const double x = std::stod(buf, &used);
    if (used != buf.size()) throw std::invalid_argument(buf);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + std::string(v) + "'");
  }
}

using Setter = std::function<void(std::string_view, const std::string&)>;

template <typename T>
Setter integer_setter(T& field) {
  return [&field](std::string_view v, const std::string& where) {
    const double x = parse_number(v, where);
    if (x != static_cast<double>(static_cast<long long>(x))) throw ConfigError(where + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (x < 0) throw ConfigError(where + ": must not be negative");
    }
    field = static_cast<T>(x);
  };
}

Setter real_setter(double& field) {
  return [&field](std::string_view v, const std::string& where) { field = parse_number(v, where); };
}

Setter bool_setter(bool& field) {
  return [&field](std::string_view v, const std::string& where) {
    if (v == "true") {
      field = true;
    } else if (v == "false") {
      field = false;
    } else {
      throw ConfigError(where + ": expected true or false, got '" + std::string(v) + "'");
    }
  };
}

}  // namespace

EngineConfig parse_config(std::string_view text) {
  EngineConfig cfg;
  std::map<std::string, std::map<std::string, Setter>> keys;

  auto& f = keys["fusion"];
  f["gap_ms"] = integer_setter(cfg.fusion.gap_ms);
  f["max_tokens"] = integer_setter(cfg.fusion.max_tokens);
  f["max_chars"] = integer_setter(cfg.fusion.max_chars);
  f["grace_ms"] = integer_setter(cfg.fusion.grace_ms);
  f["tone_conf_min"] = real_setter(cfg.fusion.tone_conf_min);
  f["overlap_min_frac"] = real_setter(cfg.fusion.overlap_min_frac);
  f["overlap_min_ms"] = integer_setter(cfg.fusion.overlap_min_ms);
  f["tone_repeat_suppress_ms"] = integer_setter(cfg.fusion.tone_repeat_suppress_ms);
  f["gesture_dedup_ms"] = integer_setter(cfg.fusion.gesture_dedup_ms);
  f["buffer_limit"] = integer_setter(cfg.fusion.buffer_limit);

  auto& p = keys["prosody"];
  p["excited_energy"] = real_setter(cfg.prosody.excited_energy);
  p["excited_f0var"] = real_setter(cfg.prosody.excited_f0var);
  p["urgent_energy"] = real_setter(cfg.prosody.urgent_energy);
  p["urgent_rate"] = real_setter(cfg.prosody.urgent_rate);
  p["calm_energy"] = real_setter(cfg.prosody.calm_energy);
  p["calm_rate"] = real_setter(cfg.prosody.calm_rate);
  p["concerned_f0var"] = real_setter(cfg.prosody.concerned_f0var);
  p["concerned_energy_max"] = real_setter(cfg.prosody.concerned_energy_max);
  p["window_frames"] = integer_setter(cfg.prosody.window_frames);
  p["frame_hop_ms"] = integer_setter(cfg.prosody.frame_hop_ms);
  p["baseline_ms"] = integer_setter(cfg.prosody.baseline_ms);

  keys["ingest"]["stall_ms"] = integer_setter(cfg.ingest.stall_ms);
  keys["ingest"]["prosody_lane"] = bool_setter(cfg.ingest.prosody_lane);

  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!keys.count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside a section");
    auto& table = keys[section];
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + ": unknown key " + section + "." + key);
    it->second(value, where + " (" + section + "." + key + ")");
  }

  cfg.fusion.validate();
  if (cfg.prosody.window_frames == 0 || cfg.prosody.frame_hop_ms <= 0 || cfg.prosody.baseline_ms < 0) {
    throw ConfigError("prosody window settings must be positive");
  }
  if (cfg.ingest.stall_ms <= 0) throw ConfigError("ingest.stall_ms must be positive");
  return cfg;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace capfuse
