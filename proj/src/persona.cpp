#include "consim/persona.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::persona {

using nlohmann::json;

std::string MbtiType::code() const {
    return std::string{attitude, perception, judgment, lifestyle};
}

const std::array<MbtiType, 16>& MbtiType::all() {
    static const std::array<MbtiType, 16> types = [] {
        std::array<MbtiType, 16> out{};
        std::size_t i = 0;
        for (char a : {'E', 'I'})
            for (char p : {'N', 'S'})
                for (char j : {'F', 'T'})
                    for (char l : {'J', 'P'}) out[i++] = MbtiType{a, p, j, l};
        std::sort(out.begin(), out.end());
        return out;
    }();
    return types;
}

MbtiType parse_mbti(std::string_view code) {
    if (code.size() != 4) {
        throw InvalidMbtiCode("MBTI code must be 4 letters, got \"" + std::string(code) + "\"");
    }
    const std::string up = to_upper(code);
    auto pick = [&](std::size_t pos, char a, char b, const char* dichotomy) {
        char c = up[pos];
        if (c != a && c != b) {
            throw InvalidMbtiCode("invalid letter '" + std::string(1, c) + "' for " + dichotomy +
                                  " in \"" + std::string(code) + "\"");
        }
        return c;
    };
    MbtiType t;
    t.attitude = pick(0, 'E', 'I', "attitude (E/I)");
    t.perception = pick(1, 'S', 'N', "perception (S/N)");
    t.judgment = pick(2, 'T', 'F', "judgment (T/F)");
    t.lifestyle = pick(3, 'J', 'P', "lifestyle (J/P)");
    return t;
}

bool is_valid_mbti_code(std::string_view code) {
    try {
        parse_mbti(code);
        return true;
    } catch (const InvalidMbtiCode&) {
        return false;
    }
}

bool NeedsPriority::is_permutation() const {
    std::array<int, 5> ranks = {physiological, safety, love_belonging, esteem, self_actualization};
    std::array<int, 5> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    return sorted == std::array<int, 5>{1, 2, 3, 4, 5};
}

std::optional<std::string> canonical_need_name(std::string_view name) {
    std::string key = to_lower(collapse_ws(name));
    // Strip decorations seen across the source tables.
    for (char& c : key) {
        if (c == '_' || c == '/' || c == ' ') c = '-';
    }
    while (!key.empty() && key.back() == '.') key.pop_back();
    static const std::map<std::string, std::string> aliases = {
        {"physiological", "physiological"},
        {"physiological-needs", "physiological"},
        {"physio", "physiological"},
        {"safety", "safety"},
        {"safety-needs", "safety"},
        {"love-belonging", "love-belonging"},
        {"love-bel", "love-belonging"},
        {"belonging", "love-belonging"},
        {"esteem", "esteem"},
        {"esteem-needs", "esteem"},
        {"self-actualization", "self-actualization"},
        {"self-actualisation", "self-actualization"},
        {"self-act", "self-actualization"},
    };
    auto it = aliases.find(key);
    if (it == aliases.end()) return std::nullopt;
    return it->second;
}

namespace {

int& need_slot(NeedsPriority& n, std::string_view canonical) {
    if (canonical == "physiological") return n.physiological;
    if (canonical == "safety") return n.safety;
    if (canonical == "love-belonging") return n.love_belonging;
    if (canonical == "esteem") return n.esteem;
    return n.self_actualization;
}

int need_value(const NeedsPriority& n, std::string_view canonical) {
    if (canonical == "physiological") return n.physiological;
    if (canonical == "safety") return n.safety;
    if (canonical == "love-belonging") return n.love_belonging;
    if (canonical == "esteem") return n.esteem;
    return n.self_actualization;
}

} // namespace

ValidationReport validate_profile(const CharacterProfile& p) {
    ValidationReport report;
    auto add = [&](std::string field, std::string reason) {
        report.violations.push_back({std::move(field), std::move(reason)});
    };

    if (p.name.empty()) add("name", "must be non-empty");
    if (p.age <= 0) add("age", "must be positive");
    if (p.description.empty()) add("description", "must be non-empty");

    auto check_memories = [&](const std::vector<std::string>& items, const char* which) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (trim(items[i]).empty()) {
                add(std::string("memories.") + which + "[" + std::to_string(i) + "]",
                    "memory text must be non-empty");
            }
        }
    };
    check_memories(p.memories.long_term, "long_term");
    check_memories(p.memories.short_term, "short_term");

    auto check_score = [&](int value, const char* field) {
        if (value < StatusScores::kMinScore || value > StatusScores::kMaxScore) {
            add(std::string("status.") + field,
                "score " + std::to_string(value) + " outside [" +
                    std::to_string(StatusScores::kMinScore) + ", " +
                    std::to_string(StatusScores::kMaxScore) + "]");
        }
    };
    check_score(p.status.physical, "physical");
    check_score(p.status.mental, "mental");
    check_score(p.status.alertness, "alertness");
    check_score(p.status.stamina, "stamina");

    if (!p.needs.is_permutation()) add("needs", "not a permutation of ranks {1,2,3,4,5}");

    return report;
}

void to_json(json& j, const CharacterProfile& p) {
    json needs = json::object();
    for (auto name : kNeedNames) needs[std::string(name)] = need_value(p.needs, name);

    j = json{
        {"name", p.name},
        {"age", p.age},
        {"gender", p.gender},
        {"race", p.race},
        {"location", p.location},
        {"mbti", p.mbti.code()},
        {"description", p.description},
        {"memories", {{"long_term", p.memories.long_term}, {"short_term", p.memories.short_term}}},
        {"status",
         {{"physical", p.status.physical},
          {"mental", p.status.mental},
          {"alertness", p.status.alertness},
          {"stamina", p.status.stamina}}},
        {"needs", needs},
        {"meta",
         {{"description_synthetic", p.meta.description_synthetic},
          {"memories_synthetic", p.meta.memories_synthetic},
          {"notes", p.meta.notes}}},
    };
}

void from_json(const json& j, CharacterProfile& p) {
    p.name = j.at("name").get<std::string>();
    p.age = j.at("age").get<int>();
    p.gender = j.value("gender", "");
    p.race = j.value("race", "");
    p.location = j.value("location", "");
    p.mbti = parse_mbti(j.at("mbti").get<std::string>());
    p.description = j.at("description").get<std::string>();

    const json& mem = j.at("memories");
    p.memories.long_term = mem.value("long_term", std::vector<std::string>{});
    p.memories.short_term = mem.value("short_term", std::vector<std::string>{});

    const json& st = j.at("status");
    p.status.physical = st.at("physical").get<int>();
    p.status.mental = st.at("mental").get<int>();
    p.status.alertness = st.at("alertness").get<int>();
    p.status.stamina = st.at("stamina").get<int>();

    for (const auto& [key, value] : j.at("needs").items()) {
        auto canonical = canonical_need_name(key);
        if (!canonical) throw std::runtime_error("unknown need name: " + key);
        need_slot(p.needs, *canonical) = value.get<int>();
    }

    p.meta = ProfileMeta{};
    if (j.contains("meta")) {
        const json& m = j.at("meta");
        p.meta.description_synthetic = m.value("description_synthetic", false);
        p.meta.memories_synthetic = m.value("memories_synthetic", false);
        p.meta.notes = m.value("notes", "");
    }
}

std::string to_canonical_json(const CharacterProfile& profile) {
    return json(profile).dump(2) + "\n";
}

CharacterProfile profile_from_json_text(const std::string& text) {
    return json::parse(text).get<CharacterProfile>();
}

std::string roster_filename(const CharacterProfile& profile) {
    return profile.mbti.code() + "_" + profile.name + ".json";
}

std::vector<CharacterProfile> load_roster(const std::filesystem::path& characters_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(characters_dir)) {
        throw CorruptBundledData(characters_dir.string(), "character directory missing");
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(characters_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<CharacterProfile> roster;
    std::set<std::string> codes;
    for (const auto& file : files) {
        CharacterProfile profile;
        try {
            profile = profile_from_json_text(read_text_file(file));
        } catch (const std::exception& e) {
            throw CorruptBundledData(file.string(), e.what());
        }
        ValidationReport report = validate_profile(profile);
        if (!report.ok()) {
            throw CorruptBundledData(file.string(), report.violations.front().field + ": " +
                                                        report.violations.front().reason);
        }
        if (!codes.insert(profile.mbti.code()).second) {
            throw CorruptBundledData(file.string(), "duplicate MBTI code " + profile.mbti.code());
        }
        roster.push_back(std::move(profile));
    }

    if (roster.size() != 16) {
        throw CorruptBundledData(characters_dir.string(),
                                 "expected 16 character files, found " +
                                     std::to_string(roster.size()));
    }
    return roster;
}

std::vector<CharacterProfile> bundled_roster() {
    return load_roster(bundled_data_root() / "characters");
}

} // namespace consim::persona
