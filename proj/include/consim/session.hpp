#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "consim/llm.hpp"
#include "consim/persona.hpp"
#include "consim/prompt.hpp"
#include "consim/scenario.hpp"
#include "consim/transcript.hpp"

namespace consim::session {

class SessionFailed : public std::runtime_error {
public:
    SessionFailed(const std::string& message, ParseErrorKind last_error)
        : std::runtime_error(message), last_error_(last_error) {}

    ParseErrorKind last_error() const { return last_error_; }

private:
    ParseErrorKind last_error_;
};

struct SessionConfig {
    std::string model_id = "gpt-4";
    double temperature = 1.0;
    int max_reasks = 1;
    bool strict_protocol = true;
    llm::RetryPolicy retry;
    /// Injectable for reproducible provenance.
    std::function<std::string()> timestamp_fn;
    /// Called with every raw reply as it arrives, before parsing, so
    /// callers can persist output that a later parse failure would
    /// otherwise discard.
    std::function<void(int attempt, const std::string& raw)> on_raw;
};

/// One completed character x scenario run, as persisted under
/// sessions/.
struct SessionRecord {
    std::string mbti;
    std::string character_name;
    int scenario_id = 0;
    ReasoningTranscript transcript;
    /// Raw model output per attempt, in order; the last one parsed.
    std::vector<std::string> attempt_raw_texts;
    std::vector<std::string> warnings;
    int attempts = 1;
};

/// "<name lowercased>_s<scenario id>", the tag fixtures key on.
std::string session_request_tag(const persona::CharacterProfile& profile, int scenario_id);

/// Renders the dialogue prompt, requests a completion, parses it; on a
/// parse error re-asks up to max_reasks times with a one-line
/// correction naming the violated rule. Throws SessionFailed once
/// re-asks are exhausted; provider errors pass through.
SessionRecord run_session(const persona::CharacterProfile& profile,
                          const scenario::Scenario& scen, const prompt::PromptEngine& engine,
                          llm::ChatProvider& provider, const SessionConfig& config = {});

/// The correction line appended after a malformed reply.
std::string correction_for(ParseErrorKind kind, const std::string& detail);

void to_json(nlohmann::json& j, const SessionRecord& r);
void from_json(const nlohmann::json& j, SessionRecord& r);

std::string session_filename(const std::string& mbti, int scenario_id);

} // namespace consim::session
