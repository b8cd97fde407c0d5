#include "consim/judge.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::judge {

using nlohmann::json;

int rating_weight(Rating r) {
    switch (r) {
    case Rating::pass:
        return 1;
    case Rating::neutral:
        return 0;
    case Rating::fail:
        return -1;
    }
    return 0;
}

std::string_view rating_name(Rating r) {
    switch (r) {
    case Rating::pass:
        return "Pass";
    case Rating::neutral:
        return "Neutral";
    case Rating::fail:
        return "Fail";
    }
    return "neutral";
}

std::optional<Rating> parse_rating(std::string_view text) {
    std::string key = to_lower(trim(text));
    if (key == "pass")
        return Rating::pass;
    if (key == "neutral")
        return Rating::neutral;
    if (key == "fail")
        return Rating::fail;
    return std::nullopt;
}

namespace {

// Drops commas that directly precede a closing brace or bracket, the
// most common malformation in model-written JSON. String literals are
// left untouched.
std::string strip_trailing_commas(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            std::size_t k = i + 1;
            while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k])))
                ++k;
            if (k < text.size() && (text[k] == '}' || text[k] == ']'))
                continue; // skip the comma
        }
        out.push_back(c);
    }
    return out;
}

// Candidate JSON snippets from a reply, most specific first: fenced
// blocks, then the outermost brace span.
std::vector<std::string> extract_candidates(std::string_view text) {
    std::vector<std::string> candidates;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find("```", pos);
        if (open == std::string_view::npos)
            break;
        std::size_t body = text.find('\n', open);
        if (body == std::string_view::npos)
            break;
        std::size_t close = text.find("```", body);
        std::string_view inner =
            close == std::string_view::npos
                ? text.substr(body + 1)
                : text.substr(body + 1, close - body - 1);
        if (inner.find('{') != std::string_view::npos)
            candidates.emplace_back(inner);
        if (close == std::string_view::npos)
            break;
        pos = close + 3;
    }
    std::size_t first = text.find('{');
    std::size_t last = text.rfind('}');
    if (first != std::string_view::npos && last != std::string_view::npos && first < last)
        candidates.emplace_back(text.substr(first, last - first + 1));
    return candidates;
}

json parse_candidate(const std::string& candidate) {
    return json::parse(strip_trailing_commas(candidate));
}

const json* find_answers(const json& root) {
    const json* node = &root;
    if (node->is_object() && node->contains("CASE") && (*node)["CASE"].is_object())
        node = &(*node)["CASE"];
    if (node->is_object() && node->contains("Evaluations") && (*node)["Evaluations"].is_object())
        node = &(*node)["Evaluations"];
    return node;
}

std::string question_key(int i) { return "Q" + std::to_string(i); }

const json* field(const json& entry, const char* upper, const char* lower) {
    if (entry.contains(upper))
        return &entry[upper];
    if (entry.contains(lower))
        return &entry[lower];
    return nullptr;
}

} // namespace

JudgeVerdict parse_verdict(std::string_view text, const VerdictParseOptions& options) {
    json root;
    if (options.lenient_extraction) {
        std::vector<std::string> candidates = extract_candidates(text);
        if (candidates.empty())
            throw MalformedVerdict("no JSON object found in reply");
        bool parsed = false;
        for (const std::string& candidate : candidates) {
            try {
                root = parse_candidate(candidate);
                parsed = true;
                break;
            } catch (const json::parse_error&) {
            }
        }
        if (!parsed)
            throw MalformedVerdict("reply contains braces but no parseable JSON object");
    } else {
        try {
            root = json::parse(trim(text));
        } catch (const json::parse_error& e) {
            throw MalformedVerdict(std::string("strict parse failed: ") + e.what());
        }
    }
    if (!root.is_object())
        throw MalformedVerdict("top-level JSON value is not an object");

    const json& answers = *find_answers(root);
    JudgeVerdict verdict;
    for (int i = 1; i <= kQuestionCount; ++i) {
        std::string key = question_key(i);
        if (!answers.contains(key))
            throw MalformedVerdict("missing " + key);
        const json& entry = answers[key];
        if (!entry.is_object())
            throw MalformedVerdict(key + " is not an object");
        const json* rating = field(entry, "Rating", "rating");
        if (rating == nullptr || !rating->is_string())
            throw MalformedVerdict("missing rating for " + key);
        std::optional<Rating> parsed = parse_rating(rating->get<std::string>());
        if (!parsed)
            throw MalformedVerdict("invalid rating \"" + rating->get<std::string>() + "\" for " +
                                   key);
        const json* justification = field(entry, "Justification", "justification");
        if (justification == nullptr || !justification->is_string() ||
            trim(justification->get<std::string>()).empty())
            throw MalformedVerdict("missing justification for " + key);
        verdict.answers[static_cast<std::size_t>(i - 1)] = {*parsed,
                                                            justification->get<std::string>()};
    }
    return verdict;
}

std::array<int, kQuestionCount> score_verdict(const JudgeVerdict& v) {
    std::array<int, kQuestionCount> weights{};
    for (int i = 0; i < kQuestionCount; ++i)
        weights[static_cast<std::size_t>(i)] =
            rating_weight(v.answers[static_cast<std::size_t>(i)].rating);
    return weights;
}

const ScoreMatrix::Row& ScoreMatrix::row(const std::string& mbti) const {
    for (const Row& r : rows)
        if (r.mbti == mbti)
            return r;
    throw std::out_of_range("no matrix row for " + mbti);
}

ScoreMatrix aggregate_matrix(const std::vector<JudgeVerdict>& verdicts) {
    ScoreMatrix matrix;
    for (const persona::MbtiType& type : persona::MbtiType::all()) {
        ScoreMatrix::Row row;
        row.mbti = type.code();
        matrix.rows.push_back(row);
    }
    std::map<std::string, std::array<double, kQuestionCount>> sums;
    std::map<std::string, int> counts;
    for (const JudgeVerdict& v : verdicts) {
        if (!persona::is_valid_mbti_code(v.case_ref.mbti))
            throw std::invalid_argument("verdict carries unknown MBTI code \"" + v.case_ref.mbti +
                                        "\"");
        std::array<int, kQuestionCount> weights = score_verdict(v);
        std::array<double, kQuestionCount>& sum = sums[v.case_ref.mbti];
        for (int i = 0; i < kQuestionCount; ++i)
            sum[static_cast<std::size_t>(i)] += weights[static_cast<std::size_t>(i)];
        ++counts[v.case_ref.mbti];
    }
    for (ScoreMatrix::Row& row : matrix.rows) {
        auto it = counts.find(row.mbti);
        if (it == counts.end())
            continue;
        row.absent = false;
        row.support = it->second;
        for (int i = 0; i < kQuestionCount; ++i)
            row.cells[static_cast<std::size_t>(i)] =
                sums[row.mbti][static_cast<std::size_t>(i)] / it->second;
    }
    return matrix;
}

void export_heatmap(const ScoreMatrix& matrix, const std::filesystem::path& csv_path,
                    const std::filesystem::path& plot_spec_path) {
    std::string csv = "mbti";
    for (int i = 1; i <= kQuestionCount; ++i)
        csv += "," + question_key(i);
    csv += "\n";
    for (const ScoreMatrix::Row& row : matrix.rows) {
        csv += row.mbti;
        for (int i = 0; i < kQuestionCount; ++i) {
            csv += ",";
            csv += row.absent ? "NA" : format_fixed(row.cells[static_cast<std::size_t>(i)], 3);
        }
        csv += "\n";
    }
    write_text_file(csv_path, csv);

    json support = json::object();
    for (const ScoreMatrix::Row& row : matrix.rows)
        support[row.mbti] = row.support;
    json spec = {{"type", "heatmap"},
                 {"data", csv_path.filename().string()},
                 {"rows", "mbti"},
                 {"columns", json::array()},
                 {"missing_value", "NA"},
                 {"color_scale",
                  {{"type", "diverging"},
                   {"domain", {-1.0, 0.0, 1.0}},
                   {"palette", {"#b2182b", "#f7f7f7", "#2166ac"}}}},
                 {"support", support}};
    for (int i = 1; i <= kQuestionCount; ++i)
        spec["columns"].push_back(question_key(i));
    write_text_file(plot_spec_path, spec.dump(2) + "\n");
}

ScoreMatrix parse_heatmap_csv(const std::string& csv_text) {
    std::vector<std::string> lines = split_lines(csv_text);
    if (lines.empty())
        throw std::invalid_argument("heatmap CSV is empty");
    ScoreMatrix matrix;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty())
            continue;
        std::vector<std::string> cells;
        std::string current;
        for (char c : lines[li]) {
            if (c == ',') {
                cells.push_back(current);
                current.clear();
            } else {
                current.push_back(c);
            }
        }
        cells.push_back(current);
        if (cells.size() != 1 + kQuestionCount)
            throw std::invalid_argument("heatmap CSV row has " + std::to_string(cells.size()) +
                                        " cells");
        ScoreMatrix::Row row;
        row.mbti = cells[0];
        row.absent = cells[1] == "NA";
        row.support = row.absent ? 0 : -1; // CSV does not carry support
        if (!row.absent)
            for (int i = 0; i < kQuestionCount; ++i)
                row.cells[static_cast<std::size_t>(i)] = std::stod(cells[static_cast<std::size_t>(i) + 1]);
        matrix.rows.push_back(row);
    }
    return matrix;
}

std::string judge_request_tag(const std::string& character_name, int scenario_id) {
    return "judge_" + to_lower(character_name) + "_s" + std::to_string(scenario_id);
}

JudgeVerdict judge_case(const persona::CharacterProfile& profile, const scenario::Scenario& scen,
                        const session::ReasoningTranscript& transcript,
                        const prompt::PromptEngine& engine, llm::ChatProvider& provider,
                        const JudgeConfig& config) {
    prompt::PromptBundle bundle = engine.render_judge_prompt(profile, scen, transcript);

    llm::ChatRequest request;
    request.model_id = config.model_id;
    request.temperature = config.temperature;
    request.request_tag = judge_request_tag(profile.name, scen.id);
    if (!bundle.system_text.empty())
        request.messages.push_back({llm::Role::system, bundle.system_text});
    request.messages.push_back({llm::Role::user, bundle.user_text});

    const int total_attempts = 1 + std::max(0, config.max_reasks);
    std::string last_error;
    for (int attempt = 1; attempt <= total_attempts; ++attempt) {
        llm::ChatResponse response = llm::chat_complete(provider, request, config.retry);
        try {
            JudgeVerdict verdict = parse_verdict(response.content, config.parse);
            verdict.case_ref = {profile.mbti.code(), scen.id};
            verdict.judge_model_id =
                response.model_id.empty() ? request.model_id : response.model_id;
            verdict.request_digest = llm::request_digest(request);
            return verdict;
        } catch (const MalformedVerdict& e) {
            last_error = e.what();
            request.messages.push_back({llm::Role::assistant, response.content});
            request.messages.push_back(
                {llm::Role::user,
                 std::string("Your previous reply was not valid (") + e.what() +
                     "). Respond again with only the JSON object, containing Q1 through Q8, "
                     "each with a Rating of Pass, Neutral or Fail and a non-empty "
                     "Justification."});
        }
    }
    throw JudgingFailed("judging " + request.request_tag + " failed after " +
                        std::to_string(total_attempts) + " attempt(s): " + last_error);
}

void to_json(json& j, const JudgeVerdict& v) {
    json answers = json::object();
    for (int i = 1; i <= kQuestionCount; ++i) {
        const Answer& a = v.answers[static_cast<std::size_t>(i - 1)];
        answers[question_key(i)] = {{"rating", std::string(rating_name(a.rating))},
                                    {"justification", a.justification}};
    }
    j = json{{"mbti", v.case_ref.mbti},
             {"scenario_id", v.case_ref.scenario_id},
             {"answers", answers},
             {"judge_model_id", v.judge_model_id},
             {"request_digest", v.request_digest}};
}

void from_json(const json& j, JudgeVerdict& v) {
    j.at("mbti").get_to(v.case_ref.mbti);
    j.at("scenario_id").get_to(v.case_ref.scenario_id);
    const json& answers = j.at("answers");
    for (int i = 1; i <= kQuestionCount; ++i) {
        const json& entry = answers.at(question_key(i));
        std::optional<Rating> rating = parse_rating(entry.at("rating").get<std::string>());
        if (!rating)
            throw std::invalid_argument("bad rating in stored verdict");
        v.answers[static_cast<std::size_t>(i - 1)] = {
            *rating, entry.at("justification").get<std::string>()};
    }
    v.judge_model_id = j.value("judge_model_id", std::string());
    v.request_digest = j.value("request_digest", std::string());
}

std::string verdict_filename(const std::string& mbti, int scenario_id) {
    return mbti + "_" + std::to_string(scenario_id) + ".json";
}

} // namespace consim::judge
