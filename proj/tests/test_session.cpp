#include "doctest.h"

#include <random>

#include <nlohmann/json.hpp>

#include "consim/persona.hpp"
#include "consim/scenario.hpp"
#include "consim/session.hpp"
#include "support.hpp"

using namespace consim::session;
using consim::llm::ChatRequest;
using consim::llm::ChatResponse;
using consim::llm::Role;
using testsupport::ScriptedProvider;

namespace {

const consim::persona::CharacterProfile& eleanor() {
    static const auto roster = consim::persona::bundled_roster();
    for (const auto& p : roster)
        if (p.mbti.code() == "ENFJ") return p;
    throw std::logic_error("no ENFJ in roster");
}

const consim::scenario::Scenario& scenario4() {
    static const auto scenarios = consim::scenario::bundled_scenarios();
    return consim::scenario::scenario_by_id(scenarios, 4);
}

const consim::prompt::PromptEngine& engine() {
    static const consim::prompt::PromptEngine instance;
    return instance;
}

} // namespace

TEST_SUITE_BEGIN("session");

TEST_CASE("request tag is the lowercased name plus scenario id") {
    CHECK(session_request_tag(eleanor(), 4) == "eleanor_s4");
    CHECK(session_filename("ENFJ", 4) == "ENFJ_4.json");
}

TEST_CASE("a well-formed first reply completes in one attempt") {
    ScriptedProvider provider;
    provider.push_reply(testsupport::read_support("eleanor_s4_reply.txt"));

    SessionConfig config;
    config.timestamp_fn = [] { return std::string("2025-03-01T12:00:00Z"); };
    SessionRecord record = run_session(eleanor(), scenario4(), engine(), provider, config);

    CHECK(record.mbti == "ENFJ");
    CHECK(record.character_name == "Eleanor");
    CHECK(record.scenario_id == 4);
    CHECK(record.attempts == 1);
    CHECK(record.attempt_raw_texts.size() == 1);
    CHECK(record.warnings.empty());
    CHECK(record.transcript.turns.size() == 4);
    CHECK(record.transcript.mbti == "ENFJ");
    CHECK(record.transcript.scenario_id == 4);
    CHECK(record.transcript.provenance.model_id == "scripted");
    CHECK(record.transcript.provenance.timestamp == "2025-03-01T12:00:00Z");
    CHECK(record.transcript.provenance.request_digest.size() == 16);

    CHECK(provider.calls() == 1);
    ChatRequest request = provider.last_request();
    CHECK(request.request_tag == "eleanor_s4");
    REQUIRE(request.messages.size() == 2);
    CHECK(request.messages[0].role == Role::system);
    CHECK(request.messages[1].role == Role::user);
    CHECK(record.transcript.provenance.request_digest == consim::llm::request_digest(request));
}

TEST_CASE("a malformed reply triggers one corrective re-ask") {
    ScriptedProvider provider;
    provider.push_reply("I refuse to answer in the requested format.");
    provider.push_reply(testsupport::valid_dialogue("the stayover"));

    SessionRecord record = run_session(eleanor(), scenario4(), engine(), provider, {});
    CHECK(record.attempts == 2);
    CHECK(record.attempt_raw_texts.size() == 2);
    CHECK(provider.calls() == 2);

    // The re-ask carries the failed reply and a correction naming the rule.
    ChatRequest second = provider.last_request();
    REQUIRE(second.messages.size() == 4);
    CHECK(second.messages[2].role == Role::assistant);
    CHECK(second.messages[2].content == "I refuse to answer in the requested format.");
    CHECK(second.messages[3].role == Role::user);
    CHECK(second.messages[3].content.find("contained no dialogue") != std::string::npos);
}

TEST_CASE("call count is exactly one plus the number of failed parses") {
    std::mt19937 rng(20250814);
    for (int round = 0; round < 12; ++round) {
        const int failures = static_cast<int>(rng() % 4);
        ScriptedProvider provider;
        for (int i = 0; i < failures; ++i) provider.push_reply("not a dialogue");
        provider.push_reply(testsupport::valid_dialogue("round " + std::to_string(round)));

        SessionConfig config;
        config.max_reasks = 5;
        SessionRecord record = run_session(eleanor(), scenario4(), engine(), provider, config);
        CHECK(provider.calls() == 1 + failures);
        CHECK(record.attempts == 1 + failures);
        CHECK(record.attempt_raw_texts.size() == static_cast<std::size_t>(1 + failures));
    }
}

TEST_CASE("exhausted re-asks raise SessionFailed with the last parse error") {
    ScriptedProvider provider;
    for (int i = 0; i < 4; ++i) provider.push_reply("still not a dialogue");

    SessionConfig config;
    config.max_reasks = 2;
    try {
        run_session(eleanor(), scenario4(), engine(), provider, config);
        FAIL("expected SessionFailed");
    } catch (const SessionFailed& e) {
        CHECK(std::string(e.what()).find("eleanor_s4") != std::string::npos);
        CHECK(std::string(e.what()).find("3 attempt(s)") != std::string::npos);
        CHECK(e.last_error() == ParseErrorKind::empty_dialogue);
    }
    CHECK(provider.calls() == 3);
}

TEST_CASE("max_reasks of zero fails on the first malformed reply") {
    ScriptedProvider provider;
    provider.push_reply("");
    SessionConfig config;
    config.max_reasks = 0;
    CHECK_THROWS_AS(run_session(eleanor(), scenario4(), engine(), provider, config),
                    SessionFailed);
    CHECK(provider.calls() == 1);
}

TEST_CASE("corrections name each protocol rule") {
    CHECK(correction_for(ParseErrorKind::empty_dialogue, "").find("contained no dialogue") !=
          std::string::npos);
    CHECK(correction_for(ParseErrorKind::no_final_action, "")
              .find("do not omit the [Final Action]") != std::string::npos);
    std::string unknown = correction_for(ParseErrorKind::unknown_speaker, "Narrator");
    CHECK(unknown.find("Narrator") != std::string::npos);
    CHECK(unknown.find("\"Preconsciousness\"") != std::string::npos);
    CHECK(correction_for(ParseErrorKind::protocol_violation, "opened with Unconsciousness")
              .find("opened with Unconsciousness") != std::string::npos);
}

TEST_CASE("provider errors pass through without being wrapped") {
    ScriptedProvider missing;
    missing.push(ScriptedProvider::fail<consim::llm::MissingFixture>("no fixture"));
    CHECK_THROWS_AS(run_session(eleanor(), scenario4(), engine(), missing, {}),
                    consim::llm::MissingFixture);

    ScriptedProvider unauthorized;
    unauthorized.push(ScriptedProvider::fail<consim::llm::AuthError>("bad key"));
    CHECK_THROWS_AS(run_session(eleanor(), scenario4(), engine(), unauthorized, {}),
                    consim::llm::AuthError);
}

TEST_CASE("on_raw observes every attempt even when the session fails") {
    ScriptedProvider provider;
    provider.push_reply("first bad reply");
    provider.push_reply("second bad reply");

    std::vector<std::pair<int, std::string>> seen;
    SessionConfig config;
    config.max_reasks = 1;
    config.on_raw = [&](int attempt, const std::string& raw) { seen.emplace_back(attempt, raw); };

    CHECK_THROWS_AS(run_session(eleanor(), scenario4(), engine(), provider, config),
                    SessionFailed);
    REQUIRE(seen.size() == 2);
    CHECK(seen[0] == std::pair<int, std::string>{1, "first bad reply"});
    CHECK(seen[1] == std::pair<int, std::string>{2, "second bad reply"});
}

TEST_CASE("lenient protocol downgrades missing-voice errors to warnings") {
    // Preconsciousness never speaks; strict rejects, lenient records.
    std::string reply = "Self-awareness: \"A thought begins.\"\n"
                        "Unconsciousness: \"A feeling answers.\"\n"
                        "Self-awareness: \"And the thought concludes.\"\n"
                        "Final Action: nod quietly.\n";

    ScriptedProvider strict_provider;
    strict_provider.push_reply(reply);
    SessionConfig strict;
    strict.max_reasks = 0;
    CHECK_THROWS_AS(run_session(eleanor(), scenario4(), engine(), strict_provider, strict),
                    SessionFailed);

    ScriptedProvider lenient_provider;
    lenient_provider.push_reply(reply);
    SessionConfig lenient;
    lenient.max_reasks = 0;
    lenient.strict_protocol = false;
    SessionRecord record =
        run_session(eleanor(), scenario4(), engine(), lenient_provider, lenient);
    CHECK(record.transcript.turns.size() == 3);
    CHECK_FALSE(record.warnings.empty());
}

TEST_CASE("session records round-trip through JSON") {
    ScriptedProvider provider;
    provider.push_reply("weird preamble\n" + testsupport::valid_dialogue("serialization"));
    SessionConfig config;
    config.timestamp_fn = [] { return std::string("2025-03-01T12:00:00Z"); };
    SessionRecord record = run_session(eleanor(), scenario4(), engine(), provider, config);

    nlohmann::json j = record;
    SessionRecord back = j.get<SessionRecord>();
    CHECK(back.mbti == record.mbti);
    CHECK(back.character_name == record.character_name);
    CHECK(back.scenario_id == record.scenario_id);
    CHECK(back.attempts == record.attempts);
    CHECK(back.attempt_raw_texts == record.attempt_raw_texts);
    CHECK(back.warnings == record.warnings);
    CHECK(back.transcript == record.transcript);
}

TEST_SUITE_END();
