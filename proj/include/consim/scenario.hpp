#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace consim::scenario {

/// The seven qualities a situation can exercise. Canonical names are
/// the lowercase identifiers; display names carry the long forms.
enum class Attribute {
    experience,
    emotion,
    logicalness,
    creativity,
    moral,
    time,
    metacognition,
};

inline constexpr std::size_t kAttributeCount = 7;

const std::array<Attribute, kAttributeCount>& all_attributes();

std::string_view attribute_name(Attribute a);
std::string_view attribute_display_name(Attribute a);
std::optional<Attribute> parse_attribute(std::string_view name);

using AttributeSet = std::set<Attribute>;

struct Scenario {
    int id = 0;
    std::string text;
    AttributeSet attributes;

    bool operator==(const Scenario&) const = default;
};

class DuplicateScenarioId : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Boolean coverage matrix: one row per scenario (input order), one
/// column per attribute in enumeration order.
struct CoverageMatrix {
    std::vector<int> scenario_ids;
    std::vector<std::array<bool, kAttributeCount>> cells;
    std::array<int, kAttributeCount> column_totals{};

    bool cell(std::size_t row, Attribute a) const {
        return cells.at(row)[static_cast<std::size_t>(a)];
    }
};

/// Throws DuplicateScenarioId; accepts any attribute sets (coverage of
/// arbitrary selections is allowed, the bundled-catalog invariants are
/// checked at load time instead).
CoverageMatrix attribute_coverage(const std::vector<Scenario>& scenarios);

/// Loads and validates a catalog file: non-empty texts, unique ids,
/// every attribute set containing experience and emotion.
/// Throws CorruptBundledData.
std::vector<Scenario> load_catalog(const std::filesystem::path& catalog_file);

/// The packaged ten-situation catalog from the bundled data root.
std::vector<Scenario> bundled_scenarios();

const Scenario& scenario_by_id(const std::vector<Scenario>& scenarios, int id);

} // namespace consim::scenario
