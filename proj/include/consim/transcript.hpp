#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace consim::session {

/// The three voices of the dialogue protocol.
enum class Speaker { self_awareness, preconsciousness, unconsciousness };

/// Canonical display label ("Self-awareness", "Preconsciousness",
/// "Unconsciousness").
std::string_view speaker_label(Speaker s);

/// Snake-case identifier ("self_awareness", ...) used in JSON and
/// report keys.
std::string_view speaker_key(Speaker s);

/// Alias-tolerant label lookup: case-insensitive, whitespace collapsed;
/// accepts "Unconsciousness mind" for the third voice. nullopt for
/// anything else.
std::optional<Speaker> parse_speaker_label(std::string_view label);

struct Turn {
    Speaker speaker = Speaker::self_awareness;
    std::string utterance;
    std::size_t index = 0;

    bool operator==(const Turn&) const = default;
};

/// Terminal element of a session: optional spoken words plus a
/// behavioral reaction. spoken/reaction are derived views of raw, so
/// raw alone round-trips.
struct FinalAction {
    std::string raw;
    std::string spoken;
    std::string reaction;

    /// Splits raw at its first double-quoted span: the span becomes
    /// spoken, surrounding text the reaction. Fully quoted or unquoted
    /// text is all reaction.
    static FinalAction from_raw(std::string raw);

    bool operator==(const FinalAction&) const = default;
};

struct Provenance {
    std::string model_id;
    std::string request_digest;
    std::string timestamp;

    bool operator==(const Provenance&) const = default;
};

struct ReasoningTranscript {
    std::string mbti;
    std::string character_name;
    int scenario_id = 0;
    std::vector<Turn> turns;
    FinalAction final_action;
    Provenance provenance;

    bool operator==(const ReasoningTranscript&) const = default;
};

enum class ParseErrorKind {
    empty_dialogue,
    no_final_action,
    unknown_speaker,
    protocol_violation,
};

std::string_view parse_error_name(ParseErrorKind kind);

class TranscriptParseError : public std::runtime_error {
public:
    TranscriptParseError(ParseErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ParseErrorKind kind() const { return kind_; }

private:
    ParseErrorKind kind_;
};

struct ParseOptions {
    /// Strict requires all three speakers and a Self-awareness closing
    /// turn; lenient downgrades both to warnings. A non-Self-awareness
    /// opening turn is an error in both modes.
    bool strict = true;
};

struct ParsedTranscript {
    ReasoningTranscript transcript;
    std::vector<std::string> warnings;
};

/// Parses raw model output into speaker turns plus the final action.
/// Tolerates a quoted-string list wrapper around the dialogue, elision
/// markers, markdown bullets around labels, and the final-action label
/// variants ("[Final Action]", "Final Action:", "Final Reaction:").
/// Throws TranscriptParseError.
ParsedTranscript parse_transcript(std::string_view text, const ParseOptions& options = {});

/// Canonical text form: one `Label: "utterance"` line per turn, then
/// `Final Action: <raw>`. parse_transcript inverts it.
std::string serialize_transcript(const ReasoningTranscript& t);

struct TranscriptStats {
    std::size_t turn_count = 0;
    std::map<Speaker, std::size_t> per_speaker;
    double mean_utterance_words = 0.0;
};

TranscriptStats transcript_stats(const ReasoningTranscript& t);

void to_json(nlohmann::json& j, const ReasoningTranscript& t);
void from_json(const nlohmann::json& j, ReasoningTranscript& t);

} // namespace consim::session
