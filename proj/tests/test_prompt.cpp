#include "doctest.h"

#include <set>

#include "consim/persona.hpp"
#include "consim/prompt.hpp"
#include "consim/scenario.hpp"
#include "consim/transcript.hpp"
#include "consim/util.hpp"
#include "support.hpp"

using namespace consim::prompt;
using consim::persona::CharacterProfile;
using consim::scenario::Scenario;

namespace {

const CharacterProfile& profile_of(const std::string& code) {
    static const std::vector<CharacterProfile> roster = consim::persona::bundled_roster();
    for (const CharacterProfile& p : roster)
        if (p.mbti.code() == code)
            return p;
    throw std::out_of_range(code);
}

const Scenario& scenario_of(int id) {
    static const std::vector<Scenario> scenarios = consim::scenario::bundled_scenarios();
    return consim::scenario::scenario_by_id(scenarios, id);
}

} // namespace

TEST_SUITE_BEGIN("prompt");

TEST_CASE("render_text substitutes tokens and honors escapes") {
    Substitutions values = {{"a", "1"}, {"b", "two"}};
    CHECK(render_text("{a} and {b}", values, {}) == "1 and two");
    CHECK(render_text("{{literal}}", values, {}) == "{literal}");
    CHECK(render_text("a { b } c", values, {}) == "a { b } c");
    CHECK(render_text("{a}{a}{a}", values, {}) == "111");

    CHECK_THROWS_WITH_AS(render_text("{missing}", values, {}),
                         doctest::Contains("missing"), UnresolvedPlaceholder);
    // Declared optional names render empty when absent.
    CHECK(render_text("[{opt}]", values, {"opt"}) == "[]");
}

TEST_CASE("scan_placeholders finds tokens, not escaped braces") {
    std::set<std::string> names = scan_placeholders("{a} {{nope}} {b-2} {a}");
    CHECK(names == std::set<std::string>{"a", "b-2"});
}

TEST_CASE("the four packaged templates load with their contracts") {
    PromptEngine engine;
    CHECK(engine.get("character-create").required_placeholders ==
          std::set<std::string>{"mbti"});
    CHECK(engine.get("memory-create").required_placeholders.empty());
    CHECK(engine.get("interconscious").required_placeholders ==
          std::set<std::string>{"desc", "event", "mbti", "memories"});
    CHECK(engine.get("judge").required_placeholders ==
          std::set<std::string>{"case", "character", "scenario"});
    CHECK_THROWS_AS(engine.get("nonexistent"), TemplateError);
}

TEST_CASE("character prompt carries the MBTI code") {
    PromptEngine engine;
    PromptBundle bundle = engine.render_character_prompt(consim::persona::parse_mbti("ENFJ"));
    std::string all = bundle.system_text + bundle.user_text;
    CHECK(all.find("\"ENFJ\" personality type of MBTI") != std::string::npos);
    CHECK(all.find("{mbti}") == std::string::npos);
}

TEST_CASE("memory prompt keeps its few-shot example") {
    PromptEngine engine;
    PromptBundle bundle = engine.render_memory_prompt(consim::persona::parse_mbti("ISTJ"));
    std::string all = bundle.system_text + bundle.user_text;
    CHECK(all.find("long-term memory") != std::string::npos);
    CHECK(all.find("I recently had a happy and proud memory") != std::string::npos);
}

TEST_CASE("dialogue prompt folds profile, status, needs, and event") {
    PromptEngine engine;
    const CharacterProfile& eleanor = profile_of("ENFJ");
    PromptBundle bundle = engine.render_interconscious_prompt(eleanor, scenario_of(4));

    CHECK(bundle.system_text.find("\"Self-awareness\" begins and ends the conversation") !=
          std::string::npos);
    CHECK(bundle.system_text.find("Do not omit the [Final Action]") != std::string::npos);

    CHECK(bundle.user_text.find("mbti : ENFJ") != std::string::npos);
    CHECK(bundle.user_text.find(eleanor.memories.long_term.front()) != std::string::npos);
    CHECK(bundle.user_text.find(
              "Status score: physical status: 7, mental status: 7, alertness: 8, stamina: 8") !=
          std::string::npos);
    CHECK(bundle.user_text.find("Needs priority: love-belonging: 1, self-actualization: 2, "
                                "esteem: 3, safety: 4, physiological: 5") != std::string::npos);
    CHECK(bundle.user_text.find(scenario_of(4).text) != std::string::npos);
    // No unresolved tokens escape the renderer.
    CHECK(bundle.user_text.find("{event}") == std::string::npos);
    CHECK(bundle.system_text.find("{prefix_text}") == std::string::npos);
}

TEST_CASE("distinct profiles and scenarios render distinct prompts") {
    PromptEngine engine;
    std::set<std::string> rendered;
    for (const CharacterProfile& p : consim::persona::bundled_roster())
        rendered.insert(engine.render_interconscious_prompt(p, scenario_of(1)).user_text);
    CHECK(rendered.size() == 16);

    const CharacterProfile& eleanor = profile_of("ENFJ");
    CHECK(engine.render_interconscious_prompt(eleanor, scenario_of(1)).user_text !=
          engine.render_interconscious_prompt(eleanor, scenario_of(2)).user_text);
}

TEST_CASE("rendering is deterministic") {
    PromptEngine a;
    PromptEngine b;
    const CharacterProfile& p = profile_of("INTJ");
    PromptBundle first = a.render_interconscious_prompt(p, scenario_of(7));
    PromptBundle second = b.render_interconscious_prompt(p, scenario_of(7));
    CHECK(first.system_text == second.system_text);
    CHECK(first.user_text == second.user_text);
}

TEST_CASE("prefix option prepends, empty prefix renders the plain instructions") {
    PromptEngine::Options with_prefix;
    with_prefix.prefix_text = "AUDIT MODE. ";
    PromptEngine prefixed(with_prefix);
    PromptEngine plain;

    const CharacterProfile& p = profile_of("ESTP");
    std::string with = prefixed.render_interconscious_prompt(p, scenario_of(1)).system_text;
    std::string without = plain.render_interconscious_prompt(p, scenario_of(1)).system_text;
    CHECK(with.starts_with("AUDIT MODE. "));
    CHECK(with.substr(std::string("AUDIT MODE. ").size()) == without);
    CHECK(without.starts_with("Here are some guidelines"));
}

TEST_CASE("single_message folds system into one user message") {
    PromptEngine::Options options;
    options.single_message = true;
    PromptEngine folded(options);
    PromptEngine split;

    const CharacterProfile& p = profile_of("ISFP");
    PromptBundle one = folded.render_interconscious_prompt(p, scenario_of(3));
    PromptBundle two = split.render_interconscious_prompt(p, scenario_of(3));
    CHECK(one.system_text.empty());
    CHECK(one.user_text == two.system_text + "\n\n" + two.user_text);
}

TEST_CASE("judge prompt embeds the worked example and the live case") {
    PromptEngine engine;
    consim::session::ReasoningTranscript transcript =
        consim::session::parse_transcript(testsupport::read_support("eleanor_s4_reply.txt"))
            .transcript;
    PromptBundle bundle =
        engine.render_judge_prompt(profile_of("ENFJ"), scenario_of(4), transcript);
    std::string all = bundle.system_text + bundle.user_text;

    CHECK(all.find("3-point scale: Pass, Neutral, Fail") != std::string::npos);
    for (const char* anchor :
         {"Q1. How well does this CASE reflect the theoretical role",
          "Q2. Considering the CHARACTER's traits",
          "Q3. How closely does the internal dialogue",
          "Q4. How well does the modeled inter-consciousness dialogue",
          "Q5. How reasonable and feasible is the Final Action",
          "Q6. How human-like and easy to understand",
          "Q7. Is the inter-consciousness information exchange",
          "Q8. Do the inter-consciousness responses"})
        CHECK(all.find(anchor) != std::string::npos);

    // The worked example survives verbatim, braces restored.
    CHECK(all.find("45-year-old man with an ENTJ personality") != std::string::npos);
    CHECK(all.find("\"CASE\": {") != std::string::npos);
    CHECK(all.find("\"Q1\": { \"Rating\": \"Pass\"") != std::string::npos);

    // The live case and its scenario are inserted.
    CHECK(all.find(scenario_of(4).text) != std::string::npos);
    CHECK(all.find("Self-awareness: \"This unexpected stayover") != std::string::npos);
    CHECK(all.find(profile_of("ENFJ").description.substr(0, 60)) != std::string::npos);
}

TEST_CASE("render errors") {
    PromptEngine engine;

    CharacterProfile blank = testsupport::make_profile("ENTP", "Lily", 15);
    blank.description.clear();
    CHECK_THROWS_AS(engine.render_interconscious_prompt(blank, scenario_of(1)),
                    IncompleteProfile);

    CharacterProfile amnesiac = testsupport::make_profile("ENTP", "Lily", 15);
    amnesiac.memories.long_term.clear();
    amnesiac.memories.short_term.clear();
    CHECK_THROWS_AS(engine.render_interconscious_prompt(amnesiac, scenario_of(1)),
                    IncompleteProfile);
}

TEST_CASE("load_template enforces the meta contract") {
    testsupport::TempDir tmp;
    consim::write_text_file(tmp.path() / "interconscious.txt", "body without tokens\n");
    consim::write_text_file(tmp.path() / "interconscious.meta.json",
                            R"({"required": ["mbti"], "optional": []})");
    CHECK_THROWS_WITH_AS(load_template(tmp.path(), "interconscious"),
                         doctest::Contains("mbti"), consim::CorruptBundledData);

    CHECK_THROWS_AS(load_template(tmp.path(), "judge"), consim::CorruptBundledData);
}

TEST_CASE("missing required substitution is reported with the template id") {
    PromptEngine engine;
    // The public render paths always fill their values; drive render_text
    // with the template contract directly instead.
    const PromptTemplate& t = engine.get("interconscious");
    Substitutions incomplete = {{"mbti", "ENFJ"}};
    CHECK_THROWS_AS(render_text(t.user_body, incomplete, t.optional_placeholders),
                    UnresolvedPlaceholder);
}

TEST_SUITE_END();
