#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "consim/llm.hpp"
#include "consim/persona.hpp"
#include "consim/prompt.hpp"
#include "consim/scenario.hpp"
#include "consim/transcript.hpp"

namespace consim::judge {

enum class Rating { pass, neutral, fail };

inline constexpr int kQuestionCount = 8;

/// Pass +1, Neutral 0, Fail -1.
int rating_weight(Rating r);
std::string_view rating_name(Rating r);
/// Case-insensitive; surrounding whitespace ignored.
std::optional<Rating> parse_rating(std::string_view text);

struct Answer {
    Rating rating = Rating::neutral;
    std::string justification;
};

struct CaseRef {
    std::string mbti;
    int scenario_id = 0;
};

struct JudgeVerdict {
    CaseRef case_ref;
    /// answers[0] is Q1.
    std::array<Answer, kQuestionCount> answers;
    std::string judge_model_id;
    std::string request_digest;
};

class MalformedVerdict : public std::runtime_error {
public:
    explicit MalformedVerdict(const std::string& why)
        : std::runtime_error("malformed verdict: " + why) {}
};

struct VerdictParseOptions {
    /// Tolerate markdown fences, surrounding prose and trailing commas.
    /// When false the whole reply must be the JSON object.
    bool lenient_extraction = true;
};

/// Extracts the ratings object from a judge reply. Accepts the answers
/// at the root, under "Evaluations", or under "CASE"/"Evaluations".
/// case_ref and provenance are left for the caller.
JudgeVerdict parse_verdict(std::string_view text, const VerdictParseOptions& options = {});

/// Per-question weights in question order.
std::array<int, kQuestionCount> score_verdict(const JudgeVerdict& v);

struct ScoreMatrix {
    struct Row {
        std::string mbti;
        /// No verdicts for this type; cells are meaningless then.
        bool absent = true;
        std::array<double, kQuestionCount> cells{};
        int support = 0;
    };
    /// Exactly 16 rows, MBTI codes in alphabetical order.
    std::vector<Row> rows;

    const Row& row(const std::string& mbti) const;
};

/// Mean question weight per MBTI type. Types without verdicts are
/// flagged absent rather than zero-filled.
ScoreMatrix aggregate_matrix(const std::vector<JudgeVerdict>& verdicts);

/// Writes the matrix as CSV (3 decimals, "NA" for absent rows) plus a
/// plot spec JSON describing a diverging heatmap over [-1, +1].
void export_heatmap(const ScoreMatrix& matrix, const std::filesystem::path& csv_path,
                    const std::filesystem::path& plot_spec_path);

/// Rebuilds a matrix from the exported CSV (support counts come back
/// zero for absent rows, -1 for present ones since the CSV drops them).
ScoreMatrix parse_heatmap_csv(const std::string& csv_text);

class JudgingFailed : public std::runtime_error {
public:
    explicit JudgingFailed(const std::string& message) : std::runtime_error(message) {}
};

struct JudgeConfig {
    std::string model_id = "gpt-4";
    double temperature = 0.0;
    int max_reasks = 1;
    VerdictParseOptions parse;
    llm::RetryPolicy retry;
};

/// "judge_<name lowercased>_s<scenario id>".
std::string judge_request_tag(const std::string& character_name, int scenario_id);

/// Renders the evaluation prompt for one finished transcript and parses
/// the reply, re-asking on malformed JSON up to max_reasks times.
JudgeVerdict judge_case(const persona::CharacterProfile& profile, const scenario::Scenario& scen,
                        const session::ReasoningTranscript& transcript,
                        const prompt::PromptEngine& engine, llm::ChatProvider& provider,
                        const JudgeConfig& config = {});

void to_json(nlohmann::json& j, const JudgeVerdict& v);
void from_json(const nlohmann::json& j, JudgeVerdict& v);

std::string verdict_filename(const std::string& mbti, int scenario_id);

} // namespace consim::judge
