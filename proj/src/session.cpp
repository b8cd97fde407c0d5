#include "consim/session.hpp"

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::session {

using nlohmann::json;

std::string session_request_tag(const persona::CharacterProfile& profile, int scenario_id) {
    return to_lower(profile.name) + "_s" + std::to_string(scenario_id);
}

std::string correction_for(ParseErrorKind kind, const std::string& detail) {
    switch (kind) {
    case ParseErrorKind::empty_dialogue:
        return "Your previous reply contained no dialogue. Rewrite it as a "
               "repetition of \"speaker name\": \"what was said\" lines where "
               "\"Self-awareness\" begins and ends the conversation, and do not "
               "omit the [Final Action].";
    case ParseErrorKind::no_final_action:
        return "Your previous reply omitted the final action. End the dialogue "
               "with a [Final Action] line consisting of words and reactions; "
               "do not omit the [Final Action].";
    case ParseErrorKind::unknown_speaker:
        return "Your previous reply used a speaker outside the protocol (" + detail +
               "). Only \"Self-awareness\", \"Preconsciousness\" and "
               "\"Unconsciousness\" may speak.";
    case ParseErrorKind::protocol_violation:
        break;
    }
    return "Your previous reply broke the dialogue protocol: " + detail +
           ". Remember that \"Self-awareness\" begins and ends the conversation "
           "and every speaker must contribute.";
}

SessionRecord run_session(const persona::CharacterProfile& profile,
                          const scenario::Scenario& scen, const prompt::PromptEngine& engine,
                          llm::ChatProvider& provider, const SessionConfig& config) {
    prompt::PromptBundle bundle = engine.render_interconscious_prompt(profile, scen);

    llm::ChatRequest request;
    request.model_id = config.model_id;
    request.temperature = config.temperature;
    request.request_tag = session_request_tag(profile, scen.id);
    if (!bundle.system_text.empty())
        request.messages.push_back({llm::Role::system, bundle.system_text});
    request.messages.push_back({llm::Role::user, bundle.user_text});

    SessionRecord record;
    record.mbti = profile.mbti.code();
    record.character_name = profile.name;
    record.scenario_id = scen.id;

    ParseOptions parse_options;
    parse_options.strict = config.strict_protocol;

    const int total_attempts = 1 + std::max(0, config.max_reasks);
    std::string last_error;
    ParseErrorKind last_kind = ParseErrorKind::protocol_violation;

    for (int attempt = 1; attempt <= total_attempts; ++attempt) {
        llm::ChatResponse response = llm::chat_complete(provider, request, config.retry);
        if (config.on_raw)
            config.on_raw(attempt, response.content);
        record.attempt_raw_texts.push_back(response.content);
        record.attempts = attempt;
        try {
            ParsedTranscript parsed = parse_transcript(response.content, parse_options);
            record.transcript = std::move(parsed.transcript);
            record.warnings = std::move(parsed.warnings);
            record.transcript.mbti = record.mbti;
            record.transcript.character_name = record.character_name;
            record.transcript.scenario_id = record.scenario_id;
            record.transcript.provenance.model_id =
                response.model_id.empty() ? request.model_id : response.model_id;
            record.transcript.provenance.request_digest = llm::request_digest(request);
            record.transcript.provenance.timestamp =
                config.timestamp_fn ? config.timestamp_fn() : iso8601_utc_now();
            return record;
        } catch (const TranscriptParseError& e) {
            last_error = e.what();
            last_kind = e.kind();
            // Keep the failed reply in context so the correction refers
            // to something the model can see.
            request.messages.push_back({llm::Role::assistant, response.content});
            request.messages.push_back({llm::Role::user, correction_for(e.kind(), e.what())});
        }
    }
    throw SessionFailed("session " + request.request_tag + " failed after " +
                            std::to_string(total_attempts) + " attempt(s): " + last_error,
                        last_kind);
}

void to_json(json& j, const SessionRecord& r) {
    j = json{{"mbti", r.mbti},
             {"character_name", r.character_name},
             {"scenario_id", r.scenario_id},
             {"transcript", r.transcript},
             {"attempt_raw_texts", r.attempt_raw_texts},
             {"warnings", r.warnings},
             {"attempts", r.attempts}};
}

void from_json(const json& j, SessionRecord& r) {
    j.at("mbti").get_to(r.mbti);
    j.at("character_name").get_to(r.character_name);
    j.at("scenario_id").get_to(r.scenario_id);
    j.at("transcript").get_to(r.transcript);
    r.attempt_raw_texts = j.value("attempt_raw_texts", std::vector<std::string>{});
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.attempts = j.value("attempts", 1);
}

std::string session_filename(const std::string& mbti, int scenario_id) {
    return mbti + "_" + std::to_string(scenario_id) + ".json";
}

} // namespace consim::session
