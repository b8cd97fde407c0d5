#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "consim/persona.hpp"

namespace consim::survey {

/// One participant rating of one character x scenario pairing.
/// completion_time_minutes is replicated across a participant's rows.
struct SurveyRecord {
    std::string participant_id;
    persona::MbtiType mbti;
    int scenario_id = 0;
    /// Likert 1..5.
    int rating = 0;
    std::optional<double> completion_time_minutes;
    std::optional<int> age;
    std::optional<std::string> gender;
};

class MalformedSurveyData : public std::runtime_error {
public:
    explicit MalformedSurveyData(const std::string& why)
        : std::runtime_error("malformed survey data: " + why) {}
};

class MissingCompletionTime : public std::runtime_error {
public:
    explicit MissingCompletionTime(const std::string& participant)
        : std::runtime_error("participant " + participant + " has no completion time"),
          participant_(participant) {}

    const std::string& participant() const { return participant_; }

private:
    std::string participant_;
};

class EmptyInput : public std::runtime_error {
public:
    explicit EmptyInput(const std::string& what_input)
        : std::runtime_error("no records to summarize: " + what_input) {}
};

/// Header: participant_id,mbti,scenario_id,rating,completion_time_minutes
/// with optional age and gender columns in any order after the first.
std::vector<SurveyRecord> parse_survey_csv(std::string_view text);
std::vector<SurveyRecord> read_survey_csv(const std::filesystem::path& path);

struct ExclusionResult {
    std::vector<SurveyRecord> retained;
    std::vector<SurveyRecord> excluded;
    /// Participant ids dropped, sorted.
    std::vector<std::string> excluded_participants;
};

/// Drops every record of any participant whose completion time is
/// strictly below the threshold. Exactly at the threshold is retained.
ExclusionResult apply_exclusion(const std::vector<SurveyRecord>& records,
                                double threshold_minutes = 10.0);

struct MeanCount {
    double mean = 0.0;
    std::size_t count = 0;
};

struct SurveySummary {
    std::size_t record_count = 0;
    std::size_t participant_count = 0;
    std::map<std::string, MeanCount> by_mbti;
    std::map<int, MeanCount> by_scenario;
    /// Same per-scenario means with the listed types excluded.
    std::map<int, MeanCount> by_scenario_filtered;
    std::vector<std::string> filtered_out_mbti;
    std::string reference_mbti;
    /// mean(type) - mean(reference), present only when the reference
    /// type occurs in the data.
    std::map<std::string, double> contrast_vs_reference;
};

struct SummarizeOptions {
    /// Types dropped from the second per-scenario pass.
    std::vector<std::string> exclude_mbti;
    std::string reference_mbti = "ENFJ";
};

SurveySummary summarize(const std::vector<SurveyRecord>& records,
                        const SummarizeOptions& options = {});

/// MBTI types whose mean rating is strictly below the floor, ordered by
/// mean ascending (ties by code).
std::vector<std::string> flag_below(const SurveySummary& summary, double floor = 4.0);

void to_json(nlohmann::json& j, const SurveySummary& s);

void write_summary_json(const SurveySummary& summary, const std::filesystem::path& path);
/// Tidy long-format export for external stats tooling.
void write_long_csv(const std::vector<SurveyRecord>& records, const std::filesystem::path& path);

} // namespace consim::survey
