#include "consim/transcript.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::session {

using nlohmann::json;

std::string_view speaker_label(Speaker s) {
    switch (s) {
    case Speaker::self_awareness: return "Self-awareness";
    case Speaker::preconsciousness: return "Preconsciousness";
    case Speaker::unconsciousness: return "Unconsciousness";
    }
    return "";
}

std::string_view speaker_key(Speaker s) {
    switch (s) {
    case Speaker::self_awareness: return "self_awareness";
    case Speaker::preconsciousness: return "preconsciousness";
    case Speaker::unconsciousness: return "unconsciousness";
    }
    return "";
}

namespace {

std::optional<Speaker> speaker_from_key(std::string_view key) {
    if (key == "self_awareness") return Speaker::self_awareness;
    if (key == "preconsciousness") return Speaker::preconsciousness;
    if (key == "unconsciousness") return Speaker::unconsciousness;
    return std::nullopt;
}

} // namespace

std::optional<Speaker> parse_speaker_label(std::string_view label) {
    std::string key = to_lower(collapse_ws(label));
    if (key == "self-awareness" || key == "self awareness") return Speaker::self_awareness;
    if (key == "preconsciousness") return Speaker::preconsciousness;
    if (key == "unconsciousness" || key == "unconsciousness mind") return Speaker::unconsciousness;
    return std::nullopt;
}

std::string_view parse_error_name(ParseErrorKind kind) {
    switch (kind) {
    case ParseErrorKind::empty_dialogue: return "EmptyDialogue";
    case ParseErrorKind::no_final_action: return "NoFinalAction";
    case ParseErrorKind::unknown_speaker: return "UnknownSpeaker";
    case ParseErrorKind::protocol_violation: return "ProtocolViolation";
    }
    return "";
}

FinalAction FinalAction::from_raw(std::string raw) {
    FinalAction fa;
    fa.raw = std::move(raw);

    const std::string text = trim(fa.raw);
    auto open = text.find('"');
    if (open == std::string::npos) {
        fa.reaction = text;
        return fa;
    }
    auto close = text.find('"', open + 1);
    if (close == std::string::npos) {
        fa.reaction = text;
        return fa;
    }

    if (open == 0 && close == text.size() - 1) {
        // One quote pair spanning everything: a described reaction, not
        // spoken words.
        fa.reaction = text.substr(1, text.size() - 2);
        return fa;
    }

    fa.spoken = text.substr(open + 1, close - open - 1);
    std::string before = trim(text.substr(0, open));
    std::string after = trim(text.substr(close + 1));
    if (before.empty()) {
        fa.reaction = after;
    } else if (after.empty()) {
        fa.reaction = before;
    } else {
        fa.reaction = before + " " + after;
    }
    return fa;
}

namespace {

[[noreturn]] void fail(ParseErrorKind kind, const std::string& message) {
    throw TranscriptParseError(kind, message);
}

bool is_elision(std::string_view line) {
    return line == "..." || line == "(...)" || line == "…" || line == "(…)";
}

/// Unwraps a quoted-string list (the bracketed, comma-separated form
/// some outputs arrive in) into one line per element. Returns nullopt
/// when the text is not shaped that way; the caller then treats it as
/// plain lines.
std::optional<std::vector<std::string>> unwrap_string_list(std::string_view text) {
    std::string body = trim(text);
    if (body.size() < 2 || body.front() != '[' || body.back() != ']') return std::nullopt;

    std::vector<std::string> elements;
    std::size_t i = 1;
    const std::size_t end = body.size() - 1;
    while (true) {
        while (i < end && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ','))
            ++i;
        if (i >= end) break;
        char quote = body[i];
        if (quote != '\'' && quote != '"') return std::nullopt;
        ++i;
        std::string element;
        bool closed = false;
        while (i < end) {
            char c = body[i];
            if (c == '\\' && i + 1 < end) {
                char esc = body[i + 1];
                if (esc == 'n') element += '\n';
                else if (esc == 't') element += '\t';
                else element += esc;
                i += 2;
                continue;
            }
            if (c == quote) {
                closed = true;
                ++i;
                break;
            }
            element += c;
            ++i;
        }
        if (!closed) return std::nullopt;
        elements.push_back(std::move(element));
    }
    if (elements.empty()) return std::nullopt;
    return elements;
}

/// Opening-quote kinds the turn format uses; curly quotes appear in
/// unsanitized model output.
struct QuoteMark {
    std::string_view open;
    std::string_view close;
};

constexpr QuoteMark kQuoteMarks[] = {
    {"\"", "\""},
    {"“", "”"},
};

const QuoteMark* match_open_quote(std::string_view text, std::size_t pos) {
    for (const QuoteMark& q : kQuoteMarks) {
        if (text.substr(pos, q.open.size()) == q.open) return &q;
    }
    return nullptr;
}

std::string strip_label_decoration(std::string_view label) {
    std::string out;
    for (char c : label) {
        if (c == '*' || c == '_' || c == '#' || c == '`') continue;
        out += c;
    }
    out = trim(out);
    while (!out.empty() && (out.front() == '-' || out.front() == '>')) out = trim(out.substr(1));
    return out;
}

bool looks_like_label(std::string_view label) {
    if (label.empty() || label.size() > 48) return false;
    return std::all_of(label.begin(), label.end(), [](unsigned char c) {
        return std::isalpha(c) || c == ' ' || c == '-' || c == '\'';
    });
}

bool is_final_label(std::string_view label) {
    std::string key = to_lower(collapse_ws(label));
    while (!key.empty() && key.front() == '[') key = trim(key.substr(1));
    while (!key.empty() && key.back() == ']') key = trim(key.substr(0, key.size() - 1));
    return key == "final action" || key == "final reaction";
}

struct Builder {
    std::vector<Turn> turns;
    std::optional<std::string> final_raw;

    // Open quoted utterance spanning lines.
    bool quote_open = false;
    const QuoteMark* quote_mark = nullptr;
    Speaker open_speaker = Speaker::self_awareness;
    std::string open_utterance;

    void commit(Speaker s, std::string utterance) {
        if (trim(utterance).empty()) {
            fail(ParseErrorKind::protocol_violation,
                 "empty utterance in turn " + std::to_string(turns.size() + 1));
        }
        turns.push_back(Turn{s, std::move(utterance), turns.size()});
    }

    void begin_utterance(Speaker s, std::string_view rest) {
        if (final_raw) {
            fail(ParseErrorKind::protocol_violation, "dialogue turn after the final action");
        }
        std::size_t i = 0;
        while (i < rest.size() && std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
        const QuoteMark* q = i < rest.size() ? match_open_quote(rest, i) : nullptr;
        if (!q) {
            commit(s, trim(rest));
            return;
        }
        std::size_t start = i + q->open.size();
        std::size_t close = rest.find(q->close, start);
        if (close != std::string_view::npos) {
            commit(s, std::string(rest.substr(start, close - start)));
            return;
        }
        quote_open = true;
        quote_mark = q;
        open_speaker = s;
        open_utterance = std::string(rest.substr(start));
    }

    void continue_quoted(std::string_view line) {
        std::size_t close = line.find(quote_mark->close);
        if (close == std::string_view::npos) {
            open_utterance += '\n';
            open_utterance += line;
            return;
        }
        open_utterance += '\n';
        open_utterance += line.substr(0, close);
        quote_open = false;
        commit(open_speaker, std::move(open_utterance));
        open_utterance.clear();
    }

    void append_loose(std::string_view line) {
        if (final_raw) {
            *final_raw += '\n';
            *final_raw += line;
        } else if (!turns.empty()) {
            turns.back().utterance += '\n';
            turns.back().utterance += std::string(line);
        }
        // Before any turn: preamble prose, dropped.
    }
};

} // namespace

ParsedTranscript parse_transcript(std::string_view text, const ParseOptions& options) {
    std::vector<std::string> lines;
    if (auto unwrapped = unwrap_string_list(text)) {
        lines = std::move(*unwrapped);
    } else {
        lines = split_lines(text);
    }

    Builder b;
    for (const std::string& raw_line : lines) {
        if (b.quote_open) {
            b.continue_quoted(raw_line);
            continue;
        }
        std::string line = trim(raw_line);
        if (line.empty() || is_elision(line)) continue;

        // Bracketed final label may carry no colon: "[Final Action] ...".
        if (!line.empty() && line.front() == '[') {
            std::size_t rb = line.find(']');
            if (rb != std::string::npos && is_final_label(line.substr(0, rb + 1))) {
                if (b.final_raw) {
                    fail(ParseErrorKind::protocol_violation, "multiple final actions");
                }
                std::string rest = trim(line.substr(rb + 1));
                if (!rest.empty() && rest.front() == ':') rest = trim(rest.substr(1));
                b.final_raw = rest;
                continue;
            }
        }

        std::size_t colon = line.find(':');
        if (colon == std::string::npos) {
            b.append_loose(line);
            continue;
        }

        std::string label = strip_label_decoration(line.substr(0, colon));
        std::string_view rest = std::string_view(line).substr(colon + 1);
        // "**Label:** text" puts the bold closer after the colon; drop it
        // when the label side carried matching decoration.
        if (line.find_first_of("*_") < colon) {
            std::size_t deco = 0;
            while (deco < rest.size() && (rest[deco] == '*' || rest[deco] == '_')) ++deco;
            rest.remove_prefix(deco);
        }

        if (is_final_label(label)) {
            if (b.final_raw) {
                fail(ParseErrorKind::protocol_violation, "multiple final actions");
            }
            b.final_raw = trim(rest);
            continue;
        }
        if (auto speaker = parse_speaker_label(label)) {
            b.begin_utterance(*speaker, rest);
            continue;
        }
        if (looks_like_label(label)) {
            if (b.turns.empty() && !b.final_raw && trim(rest).empty()) {
                continue; // "Here is the conversation:" style preamble header
            }
            fail(ParseErrorKind::unknown_speaker, "unknown speaker label \"" + label + "\"");
        }
        b.append_loose(line);
    }

    if (b.quote_open) {
        // Unterminated quote: accept what accumulated.
        b.commit(b.open_speaker, std::move(b.open_utterance));
    }

    if (b.turns.empty()) {
        fail(ParseErrorKind::empty_dialogue, "no dialogue turns found");
    }
    if (!b.final_raw) {
        fail(ParseErrorKind::no_final_action, "no [Final Action] line found");
    }
    if (trim(*b.final_raw).empty()) {
        fail(ParseErrorKind::no_final_action, "final action is empty");
    }

    ParsedTranscript out;
    out.transcript.turns = std::move(b.turns);
    out.transcript.final_action = FinalAction::from_raw(std::move(*b.final_raw));

    const auto& turns = out.transcript.turns;
    if (turns.front().speaker != Speaker::self_awareness) {
        fail(ParseErrorKind::protocol_violation,
             std::string("first turn must be Self-awareness, got ") +
                 std::string(speaker_label(turns.front().speaker)));
    }
    auto complain = [&](const std::string& message) {
        if (options.strict) fail(ParseErrorKind::protocol_violation, message);
        out.warnings.push_back(message);
    };
    if (turns.back().speaker != Speaker::self_awareness) {
        complain(std::string("last turn must be Self-awareness, got ") +
                 std::string(speaker_label(turns.back().speaker)));
    }
    for (Speaker s :
         {Speaker::self_awareness, Speaker::preconsciousness, Speaker::unconsciousness}) {
        bool present = std::any_of(turns.begin(), turns.end(),
                                   [s](const Turn& t) { return t.speaker == s; });
        if (!present) {
            complain(std::string(speaker_label(s)) + " never speaks");
        }
    }
    return out;
}

std::string serialize_transcript(const ReasoningTranscript& t) {
    std::string out;
    for (const Turn& turn : t.turns) {
        out += speaker_label(turn.speaker);
        out += ": \"";
        out += turn.utterance;
        out += "\"\n";
    }
    out += "Final Action: ";
    out += t.final_action.raw;
    out += "\n";
    return out;
}

TranscriptStats transcript_stats(const ReasoningTranscript& t) {
    TranscriptStats stats;
    stats.turn_count = t.turns.size();
    std::size_t total_words = 0;
    for (const Turn& turn : t.turns) {
        ++stats.per_speaker[turn.speaker];
        bool in_word = false;
        for (unsigned char c : turn.utterance) {
            if (std::isspace(c)) {
                in_word = false;
            } else if (!in_word) {
                in_word = true;
                ++total_words;
            }
        }
    }
    stats.mean_utterance_words =
        t.turns.empty() ? 0.0 : static_cast<double>(total_words) / t.turns.size();
    return stats;
}

void to_json(json& j, const ReasoningTranscript& t) {
    json turns = json::array();
    for (const Turn& turn : t.turns) {
        turns.push_back({{"speaker", speaker_key(turn.speaker)},
                         {"utterance", turn.utterance},
                         {"index", turn.index}});
    }
    j = json{
        {"mbti", t.mbti},
        {"character_name", t.character_name},
        {"scenario_id", t.scenario_id},
        {"turns", std::move(turns)},
        {"final_action",
         {{"raw", t.final_action.raw},
          {"spoken", t.final_action.spoken},
          {"reaction", t.final_action.reaction}}},
        {"provenance",
         {{"model_id", t.provenance.model_id},
          {"request_digest", t.provenance.request_digest},
          {"timestamp", t.provenance.timestamp}}},
    };
}

void from_json(const json& j, ReasoningTranscript& t) {
    t.mbti = j.value("mbti", "");
    t.character_name = j.value("character_name", "");
    t.scenario_id = j.value("scenario_id", 0);
    t.turns.clear();
    for (const json& turn : j.at("turns")) {
        auto speaker = speaker_from_key(turn.at("speaker").get<std::string>());
        if (!speaker) {
            throw std::runtime_error("unknown speaker key: " +
                                     turn.at("speaker").get<std::string>());
        }
        t.turns.push_back(Turn{*speaker, turn.at("utterance").get<std::string>(),
                               turn.value("index", t.turns.size())});
    }
    t.final_action = FinalAction::from_raw(j.at("final_action").at("raw").get<std::string>());
    t.provenance = Provenance{};
    if (j.contains("provenance")) {
        const json& p = j.at("provenance");
        t.provenance.model_id = p.value("model_id", "");
        t.provenance.request_digest = p.value("request_digest", "");
        t.provenance.timestamp = p.value("timestamp", "");
    }
}

} // namespace consim::session
