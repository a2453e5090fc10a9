#include <doctest.h>

#include <regex>

#include "capfuse/cue_model.hpp"
#include "capfuse/errors.hpp"
#include "support/builders.hpp"

using namespace capfuse;

TEST_SUITE("cue_model") {
  TEST_CASE("validate_label canonicalizes case and rejects unknown names") {
    const auto concerned = validate_label(CueKind::tone, "Concerned");
    CHECK(concerned.kind() == CueKind::tone);
    CHECK(concerned.name() == "concerned");

    const auto nods = validate_label(CueKind::gesture, "nods");
    CHECK(nods.kind() == CueKind::gesture);
    CHECK(nods.name() == "nods");

    CHECK_THROWS_AS(validate_label(CueKind::tone, "ecstatic"), UnknownLabel);
    CHECK_THROWS_AS(validate_label(CueKind::gesture, "concerned"), UnknownLabel);
    CHECK_THROWS_AS(validate_label(CueKind::tone, "nods"), UnknownLabel);
    CHECK_THROWS_AS(validate_label(CueKind::tone, ""), UnknownLabel);
  }

  TEST_CASE("vocabularies are the closed sets") {
    std::vector<std::string> tones(tone_vocabulary().begin(), tone_vocabulary().end());
    std::vector<std::string> gestures(gesture_vocabulary().begin(), gesture_vocabulary().end());
    CHECK(tones == std::vector<std::string>{"neutral", "excited", "concerned", "confused", "urgent", "sarcastic", "calm"});
    CHECK(gestures == std::vector<std::string>{"nods", "shrugs", "pointing", "head-shake", "hand-raise"});
  }

  TEST_CASE("format_tag surface forms") {
    CHECK(format_tag(validate_label(CueKind::tone, "excited"), Verbosity::minimal) == "[excited]");
    CHECK(format_tag(validate_label(CueKind::gesture, "pointing"), Verbosity::verbose) == "[pointing gesture]");
    CHECK(format_tag(validate_label(CueKind::tone, "confused"), Verbosity::verbose) == "[confused tone]");
    CHECK(format_tag(validate_label(CueKind::tone, "neutral"), Verbosity::verbose) == "");
    CHECK(format_tag(validate_label(CueKind::tone, "neutral"), Verbosity::minimal) == "");
    CHECK(format_tag(validate_label(CueKind::tone, "urgent"), Verbosity::off) == "");

    const std::vector<std::tuple<std::string, std::string, std::string>> gestures = {
        {"nods", "[nods]", "[nod gesture]"},
        {"shrugs", "[shrugs]", "[shrug gesture]"},
        {"pointing", "[points]", "[pointing gesture]"},
        {"head-shake", "[shakes head]", "[head-shake gesture]"},
        {"hand-raise", "[raises hand]", "[hand-raise gesture]"},
    };
    for (const auto& [name, minimal, verbose] : gestures) {
      const auto label = validate_label(CueKind::gesture, name);
      CHECK(format_tag(label, Verbosity::minimal) == minimal);
      CHECK(format_tag(label, Verbosity::verbose) == verbose);
    }
  }

  TEST_CASE("format_tag output matches the tag pattern or is empty") {
    const std::regex pattern(R"(\[[a-z][a-z -]*\])");
    for (auto kind : {CueKind::tone, CueKind::gesture}) {
      const auto vocab = kind == CueKind::tone ? tone_vocabulary() : gesture_vocabulary();
      for (auto name : vocab) {
        for (auto v : {Verbosity::off, Verbosity::minimal, Verbosity::verbose}) {
          const auto tag = format_tag(validate_label(kind, name), v);
          CHECK((tag.empty() || std::regex_match(tag, pattern)));
        }
      }
    }
  }

  TEST_CASE("parse_tag inverts both surface forms") {
    const auto shrug = parse_tag("[shrug gesture]");
    CHECK(shrug.kind() == CueKind::gesture);
    CHECK(shrug.name() == "shrugs");
    const auto urgent = parse_tag("[urgent]");
    CHECK(urgent.kind() == CueKind::tone);
    CHECK(urgent.name() == "urgent");
    CHECK(parse_tag("[shakes head]").name() == "head-shake");
    CHECK(parse_tag("[points]").name() == "pointing");

    CHECK_THROWS_AS(parse_tag("hello"), NotATag);
    CHECK_THROWS_AS(parse_tag("[unclosed"), NotATag);
    CHECK_THROWS_AS(parse_tag("[]"), UnknownSurface);
    CHECK_THROWS_AS(parse_tag("[ecstatic]"), UnknownSurface);
    CHECK_THROWS_AS(parse_tag("[nods tone]"), UnknownSurface);
    CHECK_THROWS_AS(parse_tag("[neutral]"), UnknownSurface);
  }

  TEST_CASE("parse of format is the identity for every label and both verbosities") {
    std::size_t checked = 0;
    for (auto kind : {CueKind::tone, CueKind::gesture}) {
      const auto vocab = kind == CueKind::tone ? tone_vocabulary() : gesture_vocabulary();
      for (auto name : vocab) {
        const auto label = validate_label(kind, name);
        if (label.is_neutral()) continue;
        for (auto v : {Verbosity::minimal, Verbosity::verbose}) {
          CHECK(parse_tag(format_tag(label, v)) == label);
          ++checked;
        }
      }
    }
    CHECK(checked == 2 * (6 + 5));
  }

  TEST_CASE("render_segment_text places tone first and gestures after their anchor") {
    const auto seg = build::segment({"The", "voltage", "is", "critical."}, {build::ann(CueKind::tone, "concerned")});
    CHECK(render_segment_text(seg, RenderOptions{Verbosity::minimal, true, true}) ==
          "[concerned] The voltage is critical.");
    CHECK(render_segment_text(seg, RenderOptions{Verbosity::off, true, true}) == "The voltage is critical.");

    const auto watch = build::segment({"Watch", "this."}, {build::ann(CueKind::gesture, "pointing", 1)});
    CHECK(render_segment_text(watch, RenderOptions{Verbosity::verbose, true, true}) == "Watch this. [pointing gesture]");
  }

  TEST_CASE("render honours category toggles and never leaves double spaces") {
    const auto seg = build::segment({"So", "notice", "this"},
                                    {build::ann(CueKind::tone, "excited"), build::ann(CueKind::gesture, "nods", 0),
                                     build::ann(CueKind::gesture, "shrugs", 2)});
    CHECK(render_segment_text(seg, RenderOptions{Verbosity::verbose, true, true}) ==
          "[excited tone] So [nod gesture] notice this [shrug gesture]");
    CHECK(render_segment_text(seg, RenderOptions{Verbosity::minimal, false, true}) == "So [nods] notice this [shrugs]");
    CHECK(render_segment_text(seg, RenderOptions{Verbosity::minimal, true, false}) == "[excited] So notice this");
    CHECK(render_segment_text(seg, RenderOptions{Verbosity::minimal, false, false}) == plain_text(seg));
    CHECK(plain_text(seg) == "So notice this");

    const auto neutral = build::segment({"Okay"}, {build::ann(CueKind::tone, "neutral")});
    CHECK(render_segment_text(neutral, RenderOptions::verbose_all()) == "Okay");
  }

  TEST_CASE("segment ids are zero padded") {
    CHECK(make_segment_id(17) == "seg-000017");
    CHECK(make_segment_id(1) == "seg-000001");
  }

  TEST_CASE("utf8_length counts code points") {
    CHECK(utf8_length("abc") == 3);
    CHECK(utf8_length("\xC3\xA9t\xC3\xA9") == 3);
    CHECK(utf8_length("") == 0);
  }
}
