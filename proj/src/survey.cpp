#include "consim/survey.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::survey {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            cells.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    cells.push_back(current);
    return cells;
}

int parse_int_cell(const std::string& cell, const std::string& what, std::size_t line_no) {
    try {
        std::size_t used = 0;
        int value = std::stoi(cell, &used);
        if (used != trim(cell).size() && used != cell.size())
            throw std::invalid_argument("trailing junk");
        return value;
    } catch (const std::exception&) {
        throw MalformedSurveyData("line " + std::to_string(line_no) + ": " + what + " \"" + cell +
                                  "\" is not an integer");
    }
}

double parse_double_cell(const std::string& cell, const std::string& what, std::size_t line_no) {
    try {
        return std::stod(cell);
    } catch (const std::exception&) {
        throw MalformedSurveyData("line " + std::to_string(line_no) + ": " + what + " \"" + cell +
                                  "\" is not a number");
    }
}

double participant_completion_time(const SurveyRecord& r) {
    if (!r.completion_time_minutes)
        throw MissingCompletionTime(r.participant_id);
    return *r.completion_time_minutes;
}

MeanCount finalize(double sum, std::size_t count) {
    MeanCount mc;
    mc.count = count;
    mc.mean = count == 0 ? 0.0 : sum / static_cast<double>(count);
    return mc;
}

} // namespace

std::vector<SurveyRecord> parse_survey_csv(std::string_view text) {
    std::vector<std::string> lines = split_lines(text);
    if (lines.empty() || trim(lines[0]).empty())
        throw MalformedSurveyData("missing header row");

    std::vector<std::string> header = split_csv_row(lines[0]);
    std::map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < header.size(); ++i)
        columns[to_lower(trim(header[i]))] = i;
    for (const char* required :
         {"participant_id", "mbti", "scenario_id", "rating", "completion_time_minutes"})
        if (!columns.contains(required))
            throw MalformedSurveyData(std::string("header lacks column ") + required);

    auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::string {
        std::size_t idx = columns.at(name);
        return idx < row.size() ? trim(row[idx]) : std::string();
    };
    auto optional_cell = [&](const std::vector<std::string>& row,
                             const char* name) -> std::optional<std::string> {
        auto it = columns.find(name);
        if (it == columns.end() || it->second >= row.size())
            return std::nullopt;
        std::string value = trim(row[it->second]);
        if (value.empty())
            return std::nullopt;
        return value;
    };

    std::vector<SurveyRecord> records;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty())
            continue;
        std::vector<std::string> row = split_csv_row(lines[li]);
        std::size_t line_no = li + 1;
        SurveyRecord r;
        r.participant_id = cell(row, "participant_id");
        if (r.participant_id.empty())
            throw MalformedSurveyData("line " + std::to_string(line_no) +
                                      ": empty participant_id");
        try {
            r.mbti = persona::parse_mbti(cell(row, "mbti"));
        } catch (const persona::InvalidMbtiCode& e) {
            throw MalformedSurveyData("line " + std::to_string(line_no) + ": " + e.what());
        }
        r.scenario_id = parse_int_cell(cell(row, "scenario_id"), "scenario_id", line_no);
        r.rating = parse_int_cell(cell(row, "rating"), "rating", line_no);
        if (r.rating < 1 || r.rating > 5)
            throw MalformedSurveyData("line " + std::to_string(line_no) + ": rating " +
                                      std::to_string(r.rating) + " outside [1, 5]");
        std::string time_cell = cell(row, "completion_time_minutes");
        if (!time_cell.empty())
            r.completion_time_minutes =
                parse_double_cell(time_cell, "completion_time_minutes", line_no);
        if (auto age = optional_cell(row, "age"))
            r.age = parse_int_cell(*age, "age", line_no);
        r.gender = optional_cell(row, "gender");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<SurveyRecord> read_survey_csv(const std::filesystem::path& path) {
    return parse_survey_csv(read_text_file(path));
}

ExclusionResult apply_exclusion(const std::vector<SurveyRecord>& records,
                                double threshold_minutes) {
    std::set<std::string> dropped;
    for (const SurveyRecord& r : records)
        if (participant_completion_time(r) < threshold_minutes)
            dropped.insert(r.participant_id);

    ExclusionResult result;
    for (const SurveyRecord& r : records) {
        if (dropped.contains(r.participant_id))
            result.excluded.push_back(r);
        else
            result.retained.push_back(r);
    }
    result.excluded_participants.assign(dropped.begin(), dropped.end());
    return result;
}

SurveySummary summarize(const std::vector<SurveyRecord>& records,
                        const SummarizeOptions& options) {
    if (records.empty())
        throw EmptyInput("survey record set is empty");

    SurveySummary summary;
    summary.record_count = records.size();
    summary.filtered_out_mbti = options.exclude_mbti;
    std::sort(summary.filtered_out_mbti.begin(), summary.filtered_out_mbti.end());
    summary.reference_mbti = options.reference_mbti;

    std::set<std::string> participants;
    std::set<std::string> filtered(summary.filtered_out_mbti.begin(),
                                   summary.filtered_out_mbti.end());
    std::map<std::string, double> mbti_sum;
    std::map<std::string, std::size_t> mbti_count;
    std::map<int, double> scen_sum;
    std::map<int, std::size_t> scen_count;
    std::map<int, double> scen_sum_filtered;
    std::map<int, std::size_t> scen_count_filtered;

    for (const SurveyRecord& r : records) {
        participants.insert(r.participant_id);
        std::string code = r.mbti.code();
        mbti_sum[code] += r.rating;
        ++mbti_count[code];
        scen_sum[r.scenario_id] += r.rating;
        ++scen_count[r.scenario_id];
        if (!filtered.contains(code)) {
            scen_sum_filtered[r.scenario_id] += r.rating;
            ++scen_count_filtered[r.scenario_id];
        }
    }

    summary.participant_count = participants.size();
    for (const auto& [code, count] : mbti_count)
        summary.by_mbti[code] = finalize(mbti_sum[code], count);
    for (const auto& [sid, count] : scen_count)
        summary.by_scenario[sid] = finalize(scen_sum[sid], count);
    for (const auto& [sid, count] : scen_count_filtered)
        summary.by_scenario_filtered[sid] = finalize(scen_sum_filtered[sid], count);

    auto ref = summary.by_mbti.find(summary.reference_mbti);
    if (ref != summary.by_mbti.end())
        for (const auto& [code, mc] : summary.by_mbti)
            summary.contrast_vs_reference[code] = mc.mean - ref->second.mean;
    return summary;
}

std::vector<std::string> flag_below(const SurveySummary& summary, double floor) {
    std::vector<std::pair<double, std::string>> hits;
    for (const auto& [code, mc] : summary.by_mbti)
        if (mc.mean < floor)
            hits.emplace_back(mc.mean, code);
    std::sort(hits.begin(), hits.end());
    std::vector<std::string> flagged;
    flagged.reserve(hits.size());
    for (const auto& [mean, code] : hits)
        flagged.push_back(code);
    return flagged;
}

void to_json(json& j, const SurveySummary& s) {
    json by_mbti = json::object();
    for (const auto& [code, mc] : s.by_mbti)
        by_mbti[code] = {{"mean", mc.mean}, {"count", mc.count}};
    json by_scenario = json::object();
    for (const auto& [sid, mc] : s.by_scenario)
        by_scenario[std::to_string(sid)] = {{"mean", mc.mean}, {"count", mc.count}};
    json by_scenario_filtered = json::object();
    for (const auto& [sid, mc] : s.by_scenario_filtered)
        by_scenario_filtered[std::to_string(sid)] = {{"mean", mc.mean}, {"count", mc.count}};
    json contrasts = json::object();
    for (const auto& [code, delta] : s.contrast_vs_reference)
        contrasts[code] = delta;
    j = json{{"record_count", s.record_count},
             {"participant_count", s.participant_count},
             {"by_mbti", by_mbti},
             {"by_scenario", by_scenario},
             {"by_scenario_filtered", by_scenario_filtered},
             {"filtered_out_mbti", s.filtered_out_mbti},
             {"reference_mbti", s.reference_mbti},
             {"contrast_vs_reference", contrasts}};
}

void write_summary_json(const SurveySummary& summary, const std::filesystem::path& path) {
    json j = summary;
    write_text_file(path, j.dump(2) + "\n");
}

void write_long_csv(const std::vector<SurveyRecord>& records, const std::filesystem::path& path) {
    std::string csv = "participant_id,mbti,scenario_id,rating,completion_time_minutes,age,gender\n";
    for (const SurveyRecord& r : records) {
        csv += r.participant_id + "," + r.mbti.code() + "," + std::to_string(r.scenario_id) + "," +
               std::to_string(r.rating) + ",";
        if (r.completion_time_minutes)
            csv += format_fixed(*r.completion_time_minutes, 2);
        csv += ",";
        if (r.age)
            csv += std::to_string(*r.age);
        csv += ",";
        if (r.gender)
            csv += *r.gender;
        csv += "\n";
    }
    write_text_file(path, csv);
}

} // namespace consim::survey
