// Python extension: tag grammar, rendering, preferences and headless replay.
// Structured values cross the boundary as JSON text; the package wrapper
// turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "capfuse/clock.hpp"
#include "capfuse/config.hpp"
#include "capfuse/cue_model.hpp"
#include "capfuse/errors.hpp"
#include "capfuse/ingest.hpp"
#include "capfuse/preferences.hpp"
#include "capfuse/replay.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

capfuse::CueKind kind_of(const std::string& s) {
  const auto k = capfuse::cue_kind_from_string(s);
  if (!k) throw py::value_error("kind must be 'tone' or 'gesture'");
  return *k;
}

capfuse::Verbosity verbosity_of(const std::string& s) {
  const auto v = capfuse::verbosity_from_string(s);
  if (!v) throw py::value_error("verbosity must be 'off', 'minimal' or 'verbose'");
  return *v;
}

std::vector<std::string> names(std::span<const std::string_view> vocab) { return {vocab.begin(), vocab.end()}; }

json parse_json(const std::string& text) {
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw py::value_error("invalid JSON");
  return j;
}

std::string render(const std::string& segment_json, const std::string& profile_json) {
  const auto seg = parse_json(segment_json);
  capfuse::CaptionSegment segment;
  segment.segment_id = capfuse::make_segment_id(1);
  for (const auto& t : seg.at("tokens")) {
    capfuse::TranscriptToken tok;
    tok.text = t.get<std::string>();
    segment.tokens.push_back(std::move(tok));
  }
  for (const auto& a : seg.value("annotations", json::array())) {
    const auto kind = kind_of(a.at("cat").get<std::string>());
    const auto anchor = a.value("anchor", std::size_t{0});
    if (anchor >= std::max<std::size_t>(segment.tokens.size(), 1)) throw py::value_error("annotation anchor out of range");
    segment.annotations.push_back(capfuse::Annotation{kind, capfuse::validate_label(kind, a.at("label").get<std::string>()),
                                                      anchor, a.value("conf", 1.0), {}});
  }
  return capfuse::render_segment_text(segment, capfuse::profile_from_json(parse_json(profile_json)));
}

std::string apply_preferences(const std::string& profile_json, const std::string& patch_json) {
  const auto profile =
      profile_json.empty() ? capfuse::PreferenceProfile{} : capfuse::profile_from_json(parse_json(profile_json));
  return capfuse::to_json(capfuse::apply_patch(profile, capfuse::validate_patch(parse_json(patch_json)))).dump();
}

std::string render_directives(const std::string& profile_json) {
  const auto d = capfuse::to_render_directives(capfuse::profile_from_json(parse_json(profile_json)));
  nlohmann::ordered_json j{{"font_scale", d.font_scale},
                           {"foreground", d.foreground},
                           {"background", d.background},
                           {"anchor", capfuse::to_string(d.anchor)},
                           {"line_budget", d.line_budget}};
  return j.dump();
}

std::string replay_lines(std::vector<capfuse::SessionLine> lines, const capfuse::EngineConfig& config) {
  capfuse::ManualClock clock;
  capfuse::ReplayResult result;
  {
    py::gil_scoped_release release;
    result = capfuse::run_replay(std::move(lines), 0.0, config, clock);
  }
  nlohmann::ordered_json j;
  j["transcript"] = result.transcript;
  j["metrics"] = result.metrics.to_json();
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_capfuse, m) {
  m.doc() = "Caption fusion engine: tag grammar, rendering, preferences and replay";

  py::register_exception<capfuse::Error>(m, "CapfuseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("tone_vocabulary", [] { return names(capfuse::tone_vocabulary()); });
  m.def("gesture_vocabulary", [] { return names(capfuse::gesture_vocabulary()); });
  m.def(
      "format_tag",
      [](const std::string& kind, const std::string& label, const std::string& verbosity) {
        return capfuse::format_tag(capfuse::validate_label(kind_of(kind), label), verbosity_of(verbosity));
      },
      py::arg("kind"), py::arg("label"), py::arg("verbosity") = "minimal");
  m.def(
      "parse_tag",
      [](const std::string& text) {
        const auto label = capfuse::parse_tag(text);
        return py::make_tuple(std::string(capfuse::to_string(label.kind())), std::string(label.name()));
      },
      py::arg("text"));
  m.def("_render", &render);
  m.def("_apply_preferences", &apply_preferences);
  m.def("_render_directives", &render_directives);
  m.def(
      "canonical_event", [](const std::string& line) { return capfuse::encode_event(capfuse::decode_event(line)); },
      py::arg("line"));
  m.def("_replay_file", [](const std::string& path, const std::string& config_path) {
    const auto config = config_path.empty() ? capfuse::EngineConfig{} : capfuse::load_config(config_path);
    return replay_lines(capfuse::load_session(path), config);
  });
  m.def("_replay_text", [](const std::string& text, const std::string& config_text) {
    return replay_lines(capfuse::parse_session(text), capfuse::parse_config(config_text));
  });
}
