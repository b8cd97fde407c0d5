#include "consim/scenario.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::scenario {

using nlohmann::json;

const std::array<Attribute, kAttributeCount>& all_attributes() {
    static const std::array<Attribute, kAttributeCount> attrs = {
        Attribute::experience, Attribute::emotion, Attribute::logicalness, Attribute::creativity,
        Attribute::moral,      Attribute::time,    Attribute::metacognition,
    };
    return attrs;
}

std::string_view attribute_name(Attribute a) {
    switch (a) {
    case Attribute::experience: return "experience";
    case Attribute::emotion: return "emotion";
    case Attribute::logicalness: return "logicalness";
    case Attribute::creativity: return "creativity";
    case Attribute::moral: return "moral";
    case Attribute::time: return "time";
    case Attribute::metacognition: return "metacognition";
    }
    return "";
}

std::string_view attribute_display_name(Attribute a) {
    switch (a) {
    case Attribute::experience: return "Qualia and Subjective Experience";
    case Attribute::emotion: return "Emotional Understanding";
    case Attribute::logicalness: return "Logical thinking/Decision-making";
    case Attribute::creativity: return "Creativity and Imagination";
    case Attribute::moral: return "Moral and Ethical Reasoning";
    case Attribute::time: return "Time and Temporality";
    case Attribute::metacognition: return "Metacognition and Knowledge of Knowledge";
    }
    return "";
}

std::optional<Attribute> parse_attribute(std::string_view name) {
    for (Attribute a : all_attributes()) {
        if (attribute_name(a) == name) return a;
    }
    return std::nullopt;
}

CoverageMatrix attribute_coverage(const std::vector<Scenario>& scenarios) {
    std::set<int> seen;
    for (const Scenario& s : scenarios) {
        if (!seen.insert(s.id).second) {
            throw DuplicateScenarioId("duplicate scenario id " + std::to_string(s.id));
        }
    }

    CoverageMatrix m;
    for (const Scenario& s : scenarios) {
        m.scenario_ids.push_back(s.id);
        std::array<bool, kAttributeCount> row{};
        for (Attribute a : s.attributes) {
            std::size_t col = static_cast<std::size_t>(a);
            row[col] = true;
            ++m.column_totals[col];
        }
        m.cells.push_back(row);
    }
    return m;
}

std::vector<Scenario> load_catalog(const std::filesystem::path& catalog_file) {
    json doc;
    try {
        doc = json::parse(read_text_file(catalog_file));
    } catch (const std::exception& e) {
        throw CorruptBundledData(catalog_file.string(), e.what());
    }
    if (!doc.is_array()) {
        throw CorruptBundledData(catalog_file.string(), "catalog root must be an array");
    }

    std::vector<Scenario> scenarios;
    std::set<int> ids;
    for (const json& entry : doc) {
        Scenario s;
        s.id = entry.at("id").get<int>();
        s.text = entry.at("text").get<std::string>();
        for (const json& name : entry.at("attributes")) {
            auto attr = parse_attribute(name.get<std::string>());
            if (!attr) {
                throw CorruptBundledData(catalog_file.string(),
                                         "scenario " + std::to_string(s.id) +
                                             ": unknown attribute \"" +
                                             name.get<std::string>() + "\"");
            }
            s.attributes.insert(*attr);
        }

        if (trim(s.text).empty()) {
            throw CorruptBundledData(catalog_file.string(),
                                     "scenario " + std::to_string(s.id) + ": empty text");
        }
        if (!ids.insert(s.id).second) {
            throw CorruptBundledData(catalog_file.string(),
                                     "duplicate scenario id " + std::to_string(s.id));
        }
        if (!s.attributes.contains(Attribute::experience) ||
            !s.attributes.contains(Attribute::emotion)) {
            throw CorruptBundledData(catalog_file.string(),
                                     "scenario " + std::to_string(s.id) +
                                         ": attribute set must contain experience and emotion");
        }
        scenarios.push_back(std::move(s));
    }
    return scenarios;
}

std::vector<Scenario> bundled_scenarios() {
    auto scenarios = load_catalog(bundled_data_root() / "scenarios" / "catalog.json");
    if (scenarios.size() != 10) {
        throw CorruptBundledData("scenarios/catalog.json",
                                 "expected 10 scenarios, found " +
                                     std::to_string(scenarios.size()));
    }
    return scenarios;
}

const Scenario& scenario_by_id(const std::vector<Scenario>& scenarios, int id) {
    auto it = std::find_if(scenarios.begin(), scenarios.end(),
                           [id](const Scenario& s) { return s.id == id; });
    if (it == scenarios.end()) {
        throw std::out_of_range("no scenario with id " + std::to_string(id));
    }
    return *it;
}

} // namespace consim::scenario
