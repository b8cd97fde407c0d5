#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "consim/persona.hpp"
#include "consim/scenario.hpp"
#include "consim/transcript.hpp"

namespace consim::prompt {

class TemplateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingPlaceholderValue : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnresolvedPlaceholder : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IncompleteProfile : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kTemplateIds[] = {
    "character-create",
    "memory-create",
    "interconscious",
    "judge",
};

using Substitutions = std::map<std::string, std::string>;

/// A packaged template: optional system section, user section, and the
/// placeholder contract from its meta sidecar. Placeholders are
/// single-brace {name} tokens; doubled braces escape literal braces.
struct PromptTemplate {
    std::string id;
    std::string system_body;
    std::string user_body;
    std::set<std::string> required_placeholders;
    std::set<std::string> optional_placeholders;
};

struct PromptBundle {
    std::string template_id;
    std::string system_text;
    std::string user_text;
    Substitutions substitutions;
};

/// Substitutes {name} tokens. Required names must be present in
/// `values`; optional names default to empty; any other {name} token in
/// the body throws UnresolvedPlaceholder. `{{` and `}}` emit literal
/// braces; braces not forming a token pass through unchanged.
std::string render_text(std::string_view body, const Substitutions& values,
                        const std::set<std::string>& optional_names);

/// Names of all {token}s appearing in the body.
std::set<std::string> scan_placeholders(std::string_view body);

/// Reads `<id>.txt` (with an optional `[[USER]]` marker line splitting
/// system from user text) and its `<id>.meta.json` sidecar. Verifies
/// required placeholders appear in the body. Throws CorruptBundledData.
PromptTemplate load_template(const std::filesystem::path& prompts_dir, const std::string& id);

class PromptEngine {
public:
    struct Options {
        /// Empty means the bundled prompts directory.
        std::filesystem::path prompts_dir;
        /// Folds the system section into the user text (single-message
        /// providers).
        bool single_message = false;
        /// Optional preamble substituted at the head of the dialogue
        /// instructions; empty renders the plain instructions.
        std::string prefix_text;
    };

    PromptEngine() : PromptEngine(Options{}) {}
    explicit PromptEngine(Options options);

    const PromptTemplate& get(const std::string& id) const;

    PromptBundle render_character_prompt(const persona::MbtiType& mbti) const;
    PromptBundle render_memory_prompt(const persona::MbtiType& mbti) const;
    PromptBundle render_interconscious_prompt(const persona::CharacterProfile& profile,
                                              const scenario::Scenario& scen) const;
    PromptBundle render_judge_prompt(const persona::CharacterProfile& profile,
                                     const scenario::Scenario& scen,
                                     const session::ReasoningTranscript& transcript) const;

private:
    PromptBundle render(const std::string& id, Substitutions values) const;

    Options options_;
    std::map<std::string, PromptTemplate> templates_;
};

/// Profile text blocks shared by the dialogue and judge prompts.
std::string format_memories(const persona::MemorySet& memories);
std::string format_status(const persona::StatusScores& status);
std::string format_needs(const persona::NeedsPriority& needs);
std::string format_character_block(const persona::CharacterProfile& profile);

} // namespace consim::prompt
