#include "capfuse/preferences.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

using json = nlohmann::json;

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename T, typename Parse>
T enum_field(const json& v, const char* field, Parse parse) {
  if (!v.is_string()) throw InvalidPreference(field, "expected string");
  auto parsed = parse(v.get<std::string>());
  if (!parsed) throw InvalidPreference(field, "unknown value '" + v.get<std::string>() + "'");
  return *parsed;
}

bool bool_field(const json& v, const char* field) {
  if (!v.is_boolean()) throw InvalidPreference(field, "expected boolean");
  return v.get<bool>();
}

}  // namespace

std::string_view to_string(Contrast c) {
  switch (c) {
    case Contrast::light: return "light";
    case Contrast::dark: return "dark";
    case Contrast::high_contrast: return "high_contrast";
  }
  return "dark";
}

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::bottom: return "bottom";
    case Placement::top: return "top";
    case Placement::near_speaker: return "near_speaker";
  }
  return "bottom";
}

std::optional<Contrast> contrast_from_string(std::string_view s) {
  const auto l = lowercase(s);
  if (l == "light") return Contrast::light;
  if (l == "dark") return Contrast::dark;
  if (l == "high_contrast") return Contrast::high_contrast;
  return std::nullopt;
}

std::optional<Placement> placement_from_string(std::string_view s) {
  const auto l = lowercase(s);
  if (l == "bottom") return Placement::bottom;
  if (l == "top") return Placement::top;
  if (l == "near_speaker") return Placement::near_speaker;
  return std::nullopt;
}

ProfilePatch validate_patch(const json& patch) {
  if (!patch.is_object()) throw InvalidPreference("patch", "expected object");
  ProfilePatch out;
  for (const auto& [key, v] : patch.items()) {
    if (key == "font_scale") {
      if (!v.is_number()) throw InvalidPreference(key, "expected number");
      const double x = v.get<double>();
      if (!std::isfinite(x) || x < kMinFontScale || x > kMaxFontScale) throw InvalidPreference(key, "out of range");
      out.font_scale = x;
    } else if (key == "contrast") {
      out.contrast = enum_field<Contrast>(v, "contrast", contrast_from_string);
    } else if (key == "placement") {
      out.placement = enum_field<Placement>(v, "placement", placement_from_string);
    } else if (key == "verbosity") {
      out.verbosity = enum_field<Verbosity>(v, "verbosity", verbosity_from_string);
    } else if (key == "show_tone") {
      out.show_tone = bool_field(v, "show_tone");
    } else if (key == "show_gestures") {
      out.show_gestures = bool_field(v, "show_gestures");
    } else if (key == "max_lines") {
      if (!v.is_number_integer()) throw InvalidPreference(key, "expected integer");
      const auto n = v.get<std::int64_t>();
      if (n < kMinLines || n > kMaxLines) throw InvalidPreference(key, "out of range");
      out.max_lines = static_cast<int>(n);
    } else {
      throw InvalidPreference(key, "unknown field");
    }
  }
  return out;
}

PreferenceProfile apply_patch(PreferenceProfile p, const ProfilePatch& patch) {
  if (patch.font_scale) p.font_scale = *patch.font_scale;
  if (patch.contrast) p.contrast = *patch.contrast;
  if (patch.placement) p.placement = *patch.placement;
  if (patch.verbosity) p.verbosity = *patch.verbosity;
  if (patch.show_tone) p.show_tone = *patch.show_tone;
  if (patch.show_gestures) p.show_gestures = *patch.show_gestures;
  if (patch.max_lines) p.max_lines = *patch.max_lines;
  return p;
}

nlohmann::ordered_json to_json(const PreferenceProfile& p) {
  nlohmann::ordered_json j;
  j["font_scale"] = p.font_scale;
  j["contrast"] = to_string(p.contrast);
  j["placement"] = to_string(p.placement);
  j["verbosity"] = to_string(p.verbosity);
  j["show_tone"] = p.show_tone;
  j["show_gestures"] = p.show_gestures;
  j["max_lines"] = p.max_lines;
  return j;
}

nlohmann::ordered_json to_json(const ProfilePatch& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (p.font_scale) j["font_scale"] = *p.font_scale;
  if (p.contrast) j["contrast"] = to_string(*p.contrast);
  if (p.placement) j["placement"] = to_string(*p.placement);
  if (p.verbosity) j["verbosity"] = to_string(*p.verbosity);
  if (p.show_tone) j["show_tone"] = *p.show_tone;
  if (p.show_gestures) j["show_gestures"] = *p.show_gestures;
  if (p.max_lines) j["max_lines"] = *p.max_lines;
  return j;
}

PreferenceProfile profile_from_json(const json& j) {
  static constexpr const char* kFields[] = {"font_scale", "contrast",      "placement", "verbosity",
                                            "show_tone",  "show_gestures", "max_lines"};
  if (!j.is_object()) throw InvalidPreference("profile", "expected object");
  for (const char* f : kFields) {
    if (!j.contains(f)) throw InvalidPreference(f, "missing");
  }
  return apply_patch(PreferenceProfile{}, validate_patch(j));
}

RenderOptions render_options(const PreferenceProfile& p) { return {p.verbosity, p.show_tone, p.show_gestures}; }

RenderDirectives to_render_directives(const PreferenceProfile& p) {
  RenderDirectives d;
  d.font_scale = p.font_scale;
  d.anchor = p.placement;
  d.line_budget = p.max_lines;
  switch (p.contrast) {
    case Contrast::light:
      d.foreground = "#1A1A1A";
      d.background = "#F5F5F5";
      break;
    case Contrast::dark:
      d.foreground = "#F5F5F5";
      d.background = "#1A1A1A";
      break;
    case Contrast::high_contrast:
      d.foreground = "#FFFFFF";
      d.background = "#000000";
      break;
  }
  return d;
}

bool valid_profile_name(std::string_view name) {
  if (name.empty() || name.size() > 32) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

ProfileStore::ProfileStore(std::filesystem::path directory) : dir_(std::move(directory)) {}

std::filesystem::path ProfileStore::resolve_directory(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("CAPFUSE_PROFILES_DIR"); env != nullptr && *env != '\0') return env;
  return "profiles";
}

std::filesystem::path ProfileStore::path_for(std::string_view name) const {
  if (!valid_profile_name(name)) throw InvalidPreference("name", "must match [a-z0-9_-]{1,32}");
  return dir_ / (std::string(name) + ".json");
}

std::mutex& ProfileStore::lock_for(std::string_view name) const {
  std::lock_guard guard(registry_mutex_);
  auto it = locks_.find(name);
  if (it == locks_.end()) it = locks_.emplace(std::string(name), std::make_unique<std::mutex>()).first;
  return *it->second;
}

void ProfileStore::persist(std::string_view name, const PreferenceProfile& profile) {
  const auto target = path_for(name);
  std::lock_guard guard(lock_for(name));

  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw StorageFailure("cannot create " + dir_.string() + ": " + ec.message());

  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << to_json(profile).dump(2) << '\n';
    out.flush();
    if (!out) throw StorageFailure("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw StorageFailure("cannot replace " + target.string() + ": " + ec.message());
}

LoadedProfile ProfileStore::load(std::string_view name) const {
  const auto target = path_for(name);
  std::lock_guard guard(lock_for(name));

  std::error_code ec;
  if (!std::filesystem::exists(target, ec)) return {};

  std::ifstream in(target, std::ios::binary);
  if (!in) throw StorageFailure("cannot read " + target.string());
  std::stringstream buf;
  buf << in.rdbuf();
  in.close();

  try {
    return LoadedProfile{profile_from_json(json::parse(buf.str())), true, false};
  } catch (const std::exception& e) {
    auto bad = target;
    bad += ".bad";
    std::filesystem::rename(target, bad, ec);
    spdlog::warn("corrupt profile '{}' ({}); moved to {}", std::string(name), e.what(), bad.string());
    return LoadedProfile{PreferenceProfile{}, false, true};
  }
}

}  // namespace capfuse
