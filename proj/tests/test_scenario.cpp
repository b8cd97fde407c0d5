#include "doctest.h"

#include <map>

#include "consim/scenario.hpp"
#include "consim/util.hpp"
#include "support.hpp"

using namespace consim::scenario;

namespace {

// Expected attribute coverage of the packaged catalog, written out
// independently of the loader: scenario id -> short names.
const std::map<int, std::set<std::string>> kExpectedCoverage = {
    {1, {"experience", "emotion", "creativity", "moral", "metacognition"}},
    {2, {"experience", "emotion", "logicalness", "metacognition"}},
    {3, {"experience", "emotion", "moral", "metacognition"}},
    {4, {"experience", "emotion", "logicalness", "moral", "time", "metacognition"}},
    {5, {"experience", "emotion", "moral"}},
    {6, {"experience", "emotion", "logicalness", "moral"}},
    {7, {"experience", "emotion", "moral", "metacognition"}},
    {8, {"experience", "emotion", "logicalness", "time"}},
    {9, {"experience", "emotion", "logicalness", "creativity"}},
    {10, {"experience", "emotion"}},
};

std::set<std::string> names_of(const AttributeSet& attrs) {
    std::set<std::string> names;
    for (Attribute a : attrs)
        names.insert(std::string(attribute_name(a)));
    return names;
}

} // namespace

TEST_SUITE_BEGIN("scenario");

TEST_CASE("attribute names round-trip through parse_attribute") {
    for (Attribute a : all_attributes()) {
        auto parsed = parse_attribute(attribute_name(a));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == a);
        CHECK_FALSE(attribute_display_name(a).empty());
    }
    CHECK_FALSE(parse_attribute("charisma").has_value());
    CHECK(attribute_display_name(Attribute::experience) == "Qualia and Subjective Experience");
    CHECK(attribute_display_name(Attribute::metacognition) ==
          "Metacognition and Knowledge of Knowledge");
}

TEST_CASE("bundled catalog has ten scenarios with ids 1..10") {
    std::vector<Scenario> scenarios = bundled_scenarios();
    REQUIRE(scenarios.size() == 10);
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        CHECK(scenarios[i].id == static_cast<int>(i) + 1);
        CHECK_FALSE(scenarios[i].text.empty());
        CHECK(scenarios[i].attributes.contains(Attribute::experience));
        CHECK(scenarios[i].attributes.contains(Attribute::emotion));
    }
}

TEST_CASE("bundled catalog text anchors") {
    std::vector<Scenario> scenarios = bundled_scenarios();
    CHECK(scenario_by_id(scenarios, 1).text.find("locked my keys in my car") !=
          std::string::npos);
    CHECK(scenario_by_id(scenarios, 2).text.find("spilled their coffee on my laptop") !=
          std::string::npos);
    CHECK(scenario_by_id(scenarios, 4).text.find("missed their last train") != std::string::npos);
    CHECK(scenario_by_id(scenarios, 6).text.find("lost my wallet on the subway") !=
          std::string::npos);
    CHECK(scenario_by_id(scenarios, 10).text.find("Hospice") != std::string::npos);
}

TEST_CASE("bundled catalog coverage matches the expected 70 cells") {
    std::vector<Scenario> scenarios = bundled_scenarios();
    for (const Scenario& s : scenarios) {
        INFO("scenario ", s.id);
        CHECK(names_of(s.attributes) == kExpectedCoverage.at(s.id));
    }

    CoverageMatrix matrix = attribute_coverage(scenarios);
    REQUIRE(matrix.scenario_ids.size() == 10);
    REQUIRE(matrix.cells.size() == 10);
    for (std::size_t row = 0; row < matrix.cells.size(); ++row) {
        const auto& expected = kExpectedCoverage.at(matrix.scenario_ids[row]);
        for (Attribute a : all_attributes()) {
            INFO("scenario ", matrix.scenario_ids[row], " attribute ", attribute_name(a));
            CHECK(matrix.cell(row, a) == expected.contains(std::string(attribute_name(a))));
        }
    }

    // Column totals recomputed by hand from the table above.
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::experience)] == 10);
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::emotion)] == 10);
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::logicalness)] == 5);
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::creativity)] == 2);
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::moral)] == 6);
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::time)] == 2);
    CHECK(matrix.column_totals[static_cast<std::size_t>(Attribute::metacognition)] == 5);
}

TEST_CASE("attribute_coverage rejects duplicate ids but accepts any sets") {
    std::vector<Scenario> scenarios = {{1, "a", {Attribute::experience}},
                                       {1, "b", {Attribute::emotion}}};
    CHECK_THROWS_AS(attribute_coverage(scenarios), DuplicateScenarioId);

    // A selection without the mandatory pair is still coverable.
    std::vector<Scenario> partial = {{7, "x", {Attribute::time}}};
    CoverageMatrix m = attribute_coverage(partial);
    CHECK(m.cell(0, Attribute::time));
    CHECK_FALSE(m.cell(0, Attribute::emotion));
}

TEST_CASE("scenario_by_id throws for unknown ids") {
    std::vector<Scenario> scenarios = bundled_scenarios();
    CHECK(scenario_by_id(scenarios, 7).id == 7);
    CHECK_THROWS_AS(scenario_by_id(scenarios, 11), std::out_of_range);
}

TEST_CASE("load_catalog validation") {
    testsupport::TempDir tmp;
    auto file = tmp.path() / "catalog.json";

    SUBCASE("unknown attribute") {
        consim::write_text_file(
            file, R"([{"id": 1, "text": "t", "attributes": ["experience", "emotion", "charisma"]}])");
        CHECK_THROWS_WITH_AS(load_catalog(file), doctest::Contains("charisma"),
                             consim::CorruptBundledData);
    }
    SUBCASE("missing mandatory attribute") {
        consim::write_text_file(file,
                                R"([{"id": 1, "text": "t", "attributes": ["experience"]}])");
        CHECK_THROWS_AS(load_catalog(file), consim::CorruptBundledData);
    }
    SUBCASE("duplicate id") {
        consim::write_text_file(
            file,
            R"([{"id": 1, "text": "a", "attributes": ["experience", "emotion"]},
                {"id": 1, "text": "b", "attributes": ["experience", "emotion"]}])");
        CHECK_THROWS_AS(load_catalog(file), consim::CorruptBundledData);
    }
    SUBCASE("empty text") {
        consim::write_text_file(
            file, R"([{"id": 1, "text": "", "attributes": ["experience", "emotion"]}])");
        CHECK_THROWS_AS(load_catalog(file), consim::CorruptBundledData);
    }
}

TEST_SUITE_END();
