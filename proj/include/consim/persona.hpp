#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace consim::persona {

class InvalidMbtiCode : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One of the 16 MBTI codes, one letter per dichotomy:
/// E/I (attitude), S/N (perception), T/F (judgment), J/P (lifestyle).
struct MbtiType {
    char attitude = 'E';
    char perception = 'S';
    char judgment = 'T';
    char lifestyle = 'J';

    std::string code() const;
    auto operator<=>(const MbtiType&) const = default;

    /// All 16 types in code order (ENFJ, ENFP, ..., ISTP).
    static const std::array<MbtiType, 16>& all();
};

/// Parses a 4-letter code, case-insensitive. Throws InvalidMbtiCode on
/// wrong length or a letter that does not belong to its position.
MbtiType parse_mbti(std::string_view code);

bool is_valid_mbti_code(std::string_view code);

/// Physical / mental (mood) / alertness / stamina levels.
struct StatusScores {
    // Scale bounds: the source tables show 6..9; 1..10 is the
    // conventional containing range, adjustable here.
    static constexpr int kMinScore = 1;
    static constexpr int kMaxScore = 10;

    int physical = kMinScore;
    int mental = kMinScore;
    int alertness = kMinScore;
    int stamina = kMinScore;

    bool operator==(const StatusScores&) const = default;
};

/// Rank (1 = highest priority) per need; ranks must form a
/// permutation of {1,2,3,4,5}.
struct NeedsPriority {
    int physiological = 5;
    int safety = 4;
    int love_belonging = 3;
    int esteem = 2;
    int self_actualization = 1;

    bool is_permutation() const;
    bool operator==(const NeedsPriority&) const = default;
};

/// Canonical need identifiers, in Maslow order.
inline constexpr std::array<std::string_view, 5> kNeedNames = {
    "physiological", "safety", "love-belonging", "esteem", "self-actualization"};

/// Maps spelling variants ("Love/Bel.", "self-actualisation",
/// "esteem-needs", ...) to the canonical identifier.
std::optional<std::string> canonical_need_name(std::string_view name);

struct MemorySet {
    std::vector<std::string> long_term;
    std::vector<std::string> short_term;

    bool operator==(const MemorySet&) const = default;
};

/// Provenance flags for packaged character content. Content the source
/// material does not print ships as synthetic stand-ins and is flagged
/// here; reports surface these flags.
struct ProfileMeta {
    bool description_synthetic = false;
    bool memories_synthetic = false;
    std::string notes;

    bool operator==(const ProfileMeta&) const = default;
};

struct CharacterProfile {
    std::string name;
    int age = 0;
    std::string gender;
    std::string race;
    std::string location;
    MbtiType mbti;
    std::string description;
    MemorySet memories;
    StatusScores status;
    NeedsPriority needs;
    ProfileMeta meta;

    bool operator==(const CharacterProfile&) const = default;
};

struct Violation {
    std::string field;
    std::string reason;
};

/// Violations are data, not failures: an invalid profile yields a
/// non-empty report, never a throw.
struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_profile(const CharacterProfile& profile);

void to_json(nlohmann::json& j, const CharacterProfile& p);
void from_json(const nlohmann::json& j, CharacterProfile& p);

/// Canonical serialization: sorted keys, two-space indent, trailing
/// newline. serialize -> parse -> serialize is byte-identical.
std::string to_canonical_json(const CharacterProfile& profile);
CharacterProfile profile_from_json_text(const std::string& text);

/// Loads every *.json in the directory (filename order), validates each,
/// and requires the 16 MBTI codes to appear exactly once.
/// Throws CorruptBundledData.
std::vector<CharacterProfile> load_roster(const std::filesystem::path& characters_dir);

/// The packaged 16-character roster from the bundled data root.
std::vector<CharacterProfile> bundled_roster();

/// Packaged filename for a profile: "<MBTI>_<Name>.json".
std::string roster_filename(const CharacterProfile& profile);

} // namespace consim::persona
