#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "capfuse/cue_model.hpp"

namespace capfuse {

enum class Contrast { light, dark, high_contrast };
enum class Placement { bottom, top, near_speaker };

std::string_view to_string(Contrast c);
std::string_view to_string(Placement p);
std::optional<Contrast> contrast_from_string(std::string_view s);
std::optional<Placement> placement_from_string(std::string_view s);

inline constexpr double kMinFontScale = 0.5;
inline constexpr double kMaxFontScale = 3.0;
inline constexpr int kMinLines = 1;
inline constexpr int kMaxLines = 5;

struct PreferenceProfile {
  double font_scale = 1.0;
  Contrast contrast = Contrast::dark;
  Placement placement = Placement::bottom;
  Verbosity verbosity = Verbosity::minimal;
  bool show_tone = true;
  bool show_gestures = true;
  int max_lines = 2;

  bool operator==(const PreferenceProfile&) const = default;
};

/// A validated, normalized partial profile.
struct ProfilePatch {
  std::optional<double> font_scale;
  std::optional<Contrast> contrast;
  std::optional<Placement> placement;
  std::optional<Verbosity> verbosity;
  std::optional<bool> show_tone;
  std::optional<bool> show_gestures;
  std::optional<int> max_lines;

  bool operator==(const ProfilePatch&) const = default;
  bool empty() const { return *this == ProfilePatch{}; }
};

/// Rejects unknown fields and out-of-range values; enum strings are
/// case-insensitive. Throws InvalidPreference.
ProfilePatch validate_patch(const nlohmann::json& patch);

PreferenceProfile apply_patch(PreferenceProfile profile, const ProfilePatch& patch);

nlohmann::ordered_json to_json(const PreferenceProfile& profile);
nlohmann::ordered_json to_json(const ProfilePatch& patch);
/// Full profile from JSON; every field is required.
PreferenceProfile profile_from_json(const nlohmann::json& j);

RenderOptions render_options(const PreferenceProfile& profile);

inline std::string render_segment_text(const CaptionSegment& segment, const PreferenceProfile& profile) {
  return render_segment_text(segment, render_options(profile));
}

struct RenderDirectives {
  double font_scale = 1.0;
  std::string foreground;
  std::string background;
  Placement anchor = Placement::bottom;
  int line_budget = 2;

  bool operator==(const RenderDirectives&) const = default;
};

RenderDirectives to_render_directives(const PreferenceProfile& profile);

/// Validates a profile name against [a-z0-9_-]{1,32}.
bool valid_profile_name(std::string_view name);

struct LoadedProfile {
  PreferenceProfile profile;
  /// False when no stored profile existed (defaults returned).
  bool found = false;
  /// Set when the stored file was corrupt and moved aside.
  bool corrupt = false;
};

/// One pretty-printed JSON file per named profile. Writes to the same name
/// are serialized; different names proceed independently.
class ProfileStore {
 public:
  explicit ProfileStore(std::filesystem::path directory);

  /// Resolves the directory from an explicit flag, then CAPFUSE_PROFILES_DIR,
  /// then ./profiles.
  static std::filesystem::path resolve_directory(const std::optional<std::string>& flag);

  void persist(std::string_view name, const PreferenceProfile& profile);
  LoadedProfile load(std::string_view name) const;

  const std::filesystem::path& directory() const { return dir_; }
  std::filesystem::path path_for(std::string_view name) const;

 private:
  std::mutex& lock_for(std::string_view name) const;

  std::filesystem::path dir_;
  mutable std::mutex registry_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>, std::less<>> locks_;
};

}  // namespace capfuse
