#include "consim/prompt.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::prompt {

using nlohmann::json;

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

/// Returns the token name if body[pos] opens a {name} token, else empty.
std::string_view token_at(std::string_view body, std::size_t pos) {
    if (pos + 1 >= body.size() || body[pos] != '{' || !is_ident_start(body[pos + 1])) return {};
    std::size_t end = pos + 1;
    while (end < body.size() && is_ident_char(body[end])) ++end;
    if (end >= body.size() || body[end] != '}') return {};
    return body.substr(pos + 1, end - pos - 1);
}

} // namespace

std::set<std::string> scan_placeholders(std::string_view body) {
    std::set<std::string> names;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{' && i + 1 < body.size() && body[i + 1] == '{') {
            ++i;
            continue;
        }
        if (body[i] == '}' && i + 1 < body.size() && body[i + 1] == '}') {
            ++i;
            continue;
        }
        auto name = token_at(body, i);
        if (!name.empty()) {
            names.insert(std::string(name));
            i += name.size() + 1;
        }
    }
    return names;
}

std::string render_text(std::string_view body, const Substitutions& values,
                        const std::set<std::string>& optional_names) {
    std::string out;
    out.reserve(body.size());
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
            out += '{';
            ++i;
            continue;
        }
        if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
            out += '}';
            ++i;
            continue;
        }
        auto name = token_at(body, i);
        if (name.empty()) {
            out += c;
            continue;
        }
        auto it = values.find(std::string(name));
        if (it != values.end()) {
            out += it->second;
        } else if (!optional_names.contains(std::string(name))) {
            throw UnresolvedPlaceholder("no value for placeholder {" + std::string(name) + "}");
        }
        i += name.size() + 1;
    }
    return out;
}

PromptTemplate load_template(const std::filesystem::path& prompts_dir, const std::string& id) {
    const auto body_path = prompts_dir / (id + ".txt");
    const auto meta_path = prompts_dir / (id + ".meta.json");

    std::string body;
    try {
        body = read_text_file(body_path);
    } catch (const IoError& e) {
        throw CorruptBundledData(body_path.string(), e.what());
    }

    PromptTemplate t;
    t.id = id;

    static constexpr std::string_view kUserMarker = "[[USER]]";
    std::string system_part;
    std::string user_part;
    bool saw_marker = false;
    for (const std::string& line : split_lines(body)) {
        if (trim(line) == kUserMarker) {
            saw_marker = true;
            continue;
        }
        std::string& target = saw_marker ? user_part : system_part;
        target += line;
        target += '\n';
    }
    if (saw_marker) {
        t.system_body = system_part;
        t.user_body = user_part;
    } else {
        t.user_body = system_part;
    }
    // Files carry a trailing newline; the template body does not.
    auto chop = [](std::string& s) {
        if (!s.empty() && s.back() == '\n') s.pop_back();
    };
    chop(t.system_body);
    chop(t.user_body);

    try {
        json meta = json::parse(read_text_file(meta_path));
        for (const json& name : meta.value("required", json::array())) {
            t.required_placeholders.insert(name.get<std::string>());
        }
        for (const json& name : meta.value("optional", json::array())) {
            t.optional_placeholders.insert(name.get<std::string>());
        }
    } catch (const std::exception& e) {
        throw CorruptBundledData(meta_path.string(), e.what());
    }

    auto present = scan_placeholders(t.system_body);
    auto user_found = scan_placeholders(t.user_body);
    present.insert(user_found.begin(), user_found.end());
    for (const std::string& name : t.required_placeholders) {
        if (!present.contains(name)) {
            throw CorruptBundledData(body_path.string(),
                                     "required placeholder {" + name + "} missing from body");
        }
    }
    return t;
}

PromptEngine::PromptEngine(Options options) : options_(std::move(options)) {
    if (options_.prompts_dir.empty()) {
        options_.prompts_dir = bundled_data_root() / "prompts";
    }
    for (std::string_view id : kTemplateIds) {
        templates_.emplace(std::string(id), load_template(options_.prompts_dir, std::string(id)));
    }
}

const PromptTemplate& PromptEngine::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw TemplateError("unknown template id: " + id);
    return it->second;
}

PromptBundle PromptEngine::render(const std::string& id, Substitutions values) const {
    const PromptTemplate& t = get(id);
    for (const std::string& name : t.required_placeholders) {
        if (!values.contains(name)) {
            throw MissingPlaceholderValue("template " + id + " requires {" + name + "}");
        }
    }
    if (t.optional_placeholders.contains("prefix_text") && !values.contains("prefix_text")) {
        values["prefix_text"] = options_.prefix_text;
    }

    PromptBundle bundle;
    bundle.template_id = id;
    bundle.system_text = render_text(t.system_body, values, t.optional_placeholders);
    bundle.user_text = render_text(t.user_body, values, t.optional_placeholders);
    bundle.substitutions = std::move(values);
    if (options_.single_message && !bundle.system_text.empty()) {
        bundle.user_text = bundle.system_text + "\n\n" + bundle.user_text;
        bundle.system_text.clear();
    }
    return bundle;
}

PromptBundle PromptEngine::render_character_prompt(const persona::MbtiType& mbti) const {
    return render("character-create", {{"mbti", mbti.code()}});
}

PromptBundle PromptEngine::render_memory_prompt(const persona::MbtiType& mbti) const {
    // The memory instructions carry no slot for the code (the few-shot
    // example stays verbatim); the target type rides along in the
    // substitution record for provenance.
    return render("memory-create", {{"mbti", mbti.code()}});
}

std::string format_memories(const persona::MemorySet& memories) {
    std::string out = "- Long-term memory\n";
    for (std::size_t i = 0; i < memories.long_term.size(); ++i) {
        out += std::to_string(i + 1) + ") " + memories.long_term[i] + "\n";
    }
    out += "\n- Short-term memory\n";
    for (std::size_t i = 0; i < memories.short_term.size(); ++i) {
        out += std::to_string(i + 1) + ") " + memories.short_term[i] + "\n";
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string format_status(const persona::StatusScores& status) {
    return "physical status: " + std::to_string(status.physical) +
           ", mental status: " + std::to_string(status.mental) +
           ", alertness: " + std::to_string(status.alertness) +
           ", stamina: " + std::to_string(status.stamina);
}

std::string format_needs(const persona::NeedsPriority& needs) {
    // Listed by rank, most pressing first.
    std::vector<std::pair<int, std::string_view>> ranked = {
        {needs.physiological, persona::kNeedNames[0]},
        {needs.safety, persona::kNeedNames[1]},
        {needs.love_belonging, persona::kNeedNames[2]},
        {needs.esteem, persona::kNeedNames[3]},
        {needs.self_actualization, persona::kNeedNames[4]},
    };
    std::sort(ranked.begin(), ranked.end());
    std::string out;
    for (const auto& [rank, name] : ranked) {
        if (!out.empty()) out += ", ";
        out += std::string(name) + ": " + std::to_string(rank);
    }
    return out;
}

std::string format_character_block(const persona::CharacterProfile& profile) {
    return profile.description + "\n\n" + format_memories(profile.memories);
}

PromptBundle PromptEngine::render_interconscious_prompt(const persona::CharacterProfile& profile,
                                                        const scenario::Scenario& scen) const {
    if (trim(profile.description).empty()) {
        throw IncompleteProfile(profile.name + ": description missing");
    }
    if (profile.memories.long_term.empty() && profile.memories.short_term.empty()) {
        throw IncompleteProfile(profile.name + ": memories missing");
    }

    std::string desc = profile.description + "\n\nStatus score: " + format_status(profile.status) +
                       "\nNeeds priority: " + format_needs(profile.needs);
    return render("interconscious", {
                                        {"mbti", profile.mbti.code()},
                                        {"memories", format_memories(profile.memories)},
                                        {"desc", desc},
                                        {"event", scen.text},
                                    });
}

PromptBundle PromptEngine::render_judge_prompt(const persona::CharacterProfile& profile,
                                               const scenario::Scenario& scen,
                                               const session::ReasoningTranscript& t) const {
    return render("judge", {
                               {"character", format_character_block(profile)},
                               {"scenario", scen.text},
                               {"case", session::serialize_transcript(t)},
                           });
}

} // namespace consim::prompt
