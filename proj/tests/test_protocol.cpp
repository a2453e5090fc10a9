#include <doctest.h>

#include <fstream>
#include <random>

#include "capfuse/errors.hpp"
#include "capfuse/protocol.hpp"
#include "support/builders.hpp"
#include "support/protocol_gen.hpp"

using namespace capfuse;
using nlohmann::json;

TEST_SUITE("protocol") {
  TEST_CASE("client frames decode") {
    const auto hello = std::get<HelloMsg>(decode_client(R"({"type":"hello","v":1})"));
    CHECK(hello.v == 1);
    CHECK_FALSE(hello.resume);
    CHECK_FALSE(hello.prefs);

    const auto resume = std::get<HelloMsg>(
        decode_client(R"({"type":"hello","v":1,"resume":"0123456789abcdef:3","prefs":{"verbosity":"off"}})"));
    CHECK(resume.resume == "0123456789abcdef:3");
    CHECK(resume.prefs->at("verbosity") == "off");

    CHECK(std::holds_alternative<PrefsMsg>(decode_client(R"({"type":"prefs","patch":{}})")));
    CHECK(std::holds_alternative<PongMsg>(decode_client(R"({"type":"pong"})")));
    // Null optional fields are treated as absent.
    CHECK_FALSE(std::get<HelloMsg>(decode_client(R"({"type":"hello","v":1,"resume":null})")).resume);
  }

  TEST_CASE("malformed client frames") {
    for (const char* frame : {"", "nope", "[]", R"({"v":1})", R"({"type":"hello"})", R"({"type":"hello","v":"1"})",
                              R"({"type":"prefs"})", R"({"type":"prefs","patch":[]})", R"({"type":"bye"})",
                              R"({"type":"hello","v":1,"resume":5})"}) {
      CHECK_THROWS_AS(decode_client(frame), ProtocolError);
    }
  }

  TEST_CASE("server frames use the documented field names") {
    auto seg = build::segment({"Watch", "this."}, {build::ann(CueKind::gesture, "pointing", 1, 0.75)});
    seg.segment_id = "seg-000017";
    seg.state = SegmentState::final;
    seg.revision = 2;
    const auto frame = encode_server(make_segment_msg(seg, PreferenceProfile{}));
    CHECK(frame ==
          R"({"type":"segment","id":"seg-000017","state":"final","rev":2,"t0":0,"t1":600,"plain":"Watch this.",)"
          R"("rendered":"Watch this. [points]","annotations":[{"cat":"gesture","label":"pointing","anchor":1,"conf":0.75}],)"
          R"("tokens":["Watch","this."]})");

    const auto ack = json::parse(encode_server(HelloAckMsg{"0123456789abcdef", PreferenceProfile{}, false, std::nullopt}));
    CHECK(ack.at("type") == "hello_ack");
    CHECK(ack.at("session") == "0123456789abcdef");
    CHECK(ack.at("resumed") == false);
    CHECK(ack.at("prefs").at("verbosity") == "minimal");
    CHECK_FALSE(ack.contains("warning"));

    const auto snap = json::parse(encode_server(SnapshotMsg{{}, std::nullopt, "0123456789abcdef:0"}));
    CHECK(snap.at("segments").empty());
    CHECK(snap.at("open").is_null());
    CHECK(encode_server(PingMsg{}) == R"({"type":"ping"})");
    CHECK(encode_server(ErrorMsg{"bad_version", "x"}) == R"({"type":"error","code":"bad_version","detail":"x"})");
  }

  TEST_CASE("rendering per profile") {
    const auto seg = build::segment({"So", "notice", "this"},
                                    {build::ann(CueKind::tone, "excited"), build::ann(CueKind::gesture, "nods", 0)});
    PreferenceProfile minimal;
    PreferenceProfile off;
    off.verbosity = Verbosity::off;
    const auto a = make_segment_msg(seg, minimal);
    const auto b = make_segment_msg(seg, off);
    CHECK(a.plain == b.plain);
    CHECK(a.rendered == "[excited] So [nods] notice this");
    CHECK(b.rendered == b.plain);
    CHECK(a.annotations == b.annotations);

    PreferenceProfile no_gestures;
    no_gestures.show_gestures = false;
    const auto c = make_segment_msg(seg, no_gestures);
    CHECK(c.rendered == "[excited] So notice this");
    CHECK(c.annotations.size() == 2);
  }

  TEST_CASE("codec round-trip on random messages") {
    std::mt19937_64 rng(31337);
    for (int i = 0; i < 1000; ++i) {
      const auto c = protogen::client(rng);
      const auto cf = encode_client(c);
      const auto c2 = decode_client(cf);
      REQUIRE(c2 == c);
      CHECK(encode_client(c2) == cf);

      const auto s = protogen::server(rng);
      const auto sf = encode_server(s);
      const auto s2 = decode_server(sf);
      REQUIRE(s2 == s);
      CHECK(encode_server(s2) == sf);
    }
  }
}

TEST_SUITE("render_conformance") {
  TEST_CASE("engine rendering matches every shared fixture case") {
    std::ifstream in(std::filesystem::path(CAPFUSE_SOURCE_DIR) / "fixtures" / "render_cases.json");
    REQUIRE(in.good());
    const auto doc = json::parse(in);
    const auto& cases = doc.at("cases");
    REQUIRE(cases.size() > 100);
    for (const auto& c : cases) {
      CaptionSegment seg;
      seg.segment_id = make_segment_id(1);
      Timestamp t = 0;
      for (const auto& tok : c.at("segment").at("tokens")) {
        seg.tokens.push_back(build::tok(tok.get<std::string>(), t, t + 100));
        t += 100;
      }
      for (const auto& a : c.at("segment").at("annotations")) {
        const auto kind = *cue_kind_from_string(a.at("cat").get<std::string>());
        seg.annotations.push_back(Annotation{kind, validate_label(kind, a.at("label").get<std::string>()),
                                             a.at("anchor").get<std::size_t>(), a.at("conf").get<double>(), {}});
      }
      const auto profile = profile_from_json(c.at("profile"));
      const auto expected = c.at("expected").get<std::string>();
      CHECK_MESSAGE(render_segment_text(seg, profile) == expected, c.at("name").get<std::string>());

      // What a client receives is enough to re-render locally.
      const auto msg = segment_msg_from_json(json::parse(encode_server(make_segment_msg(seg, profile))));
      CHECK(msg.rendered == expected);
      CHECK(msg.tokens.size() == seg.tokens.size());
    }
  }
}
