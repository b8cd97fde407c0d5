#include "consim/workspace.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::workspace {

using nlohmann::json;

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"provider", c.provider},
             {"base_url", c.base_url},
             {"api_key_env", c.api_key_env},
             {"generation_model", c.generation_model},
             {"judge_model", c.judge_model},
             {"generation_temperature", c.generation_temperature},
             {"judge_temperature", c.judge_temperature},
             {"max_concurrent_requests", c.max_concurrent_requests},
             {"max_reasks", c.max_reasks},
             {"strict_protocol", c.strict_protocol},
             {"single_message_prompts", c.single_message_prompts},
             {"prefix_text", c.prefix_text},
             {"retry",
              {{"max_attempts", c.retry.max_attempts},
               {"base_backoff_ms", c.retry.base_backoff.count()},
               {"backoff_multiplier", c.retry.backoff_multiplier}}},
             {"characters_dir", c.characters_dir},
             {"scenarios_file", c.scenarios_file},
             {"prompts_dir", c.prompts_dir},
             {"mbti_filter", c.mbti_filter},
             {"scenario_filter", c.scenario_filter},
             {"skip_flagged", c.skip_flagged}};
}

void from_json(const json& j, ExperimentConfig& c) {
    ExperimentConfig defaults;
    c.provider = j.value("provider", defaults.provider);
    c.base_url = j.value("base_url", defaults.base_url);
    c.api_key_env = j.value("api_key_env", defaults.api_key_env);
    c.generation_model = j.value("generation_model", defaults.generation_model);
    c.judge_model = j.value("judge_model", defaults.judge_model);
    c.generation_temperature = j.value("generation_temperature", defaults.generation_temperature);
    c.judge_temperature = j.value("judge_temperature", defaults.judge_temperature);
    c.max_concurrent_requests = j.value("max_concurrent_requests", defaults.max_concurrent_requests);
    c.max_reasks = j.value("max_reasks", defaults.max_reasks);
    c.strict_protocol = j.value("strict_protocol", defaults.strict_protocol);
    c.single_message_prompts = j.value("single_message_prompts", defaults.single_message_prompts);
    c.prefix_text = j.value("prefix_text", defaults.prefix_text);
    if (j.contains("retry")) {
        const json& r = j.at("retry");
        c.retry.max_attempts = r.value("max_attempts", defaults.retry.max_attempts);
        c.retry.base_backoff =
            std::chrono::milliseconds(r.value("base_backoff_ms", defaults.retry.base_backoff.count()));
        c.retry.backoff_multiplier = r.value("backoff_multiplier", defaults.retry.backoff_multiplier);
    }
    c.characters_dir = j.value("characters_dir", defaults.characters_dir);
    c.scenarios_file = j.value("scenarios_file", defaults.scenarios_file);
    c.prompts_dir = j.value("prompts_dir", defaults.prompts_dir);
    c.mbti_filter = j.value("mbti_filter", defaults.mbti_filter);
    c.scenario_filter = j.value("scenario_filter", defaults.scenario_filter);
    c.skip_flagged = j.value("skip_flagged", defaults.skip_flagged);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw CorruptBundledData(path.string(), e.what());
    }
    return j.get<ExperimentConfig>();
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
    json j = config;
    write_text_file(path, j.dump(2) + "\n");
}

void Workspace::init() const {
    std::filesystem::create_directories(sessions_dir());
    std::filesystem::create_directories(raw_dir());
    std::filesystem::create_directories(verdicts_dir());
    std::filesystem::create_directories(reports_dir());
    std::filesystem::create_directories(fixtures_dir());
    if (!std::filesystem::exists(config_file()))
        save_config(ExperimentConfig{}, config_file());
}

std::string_view pair_status_name(PairStatus s) {
    switch (s) {
    case PairStatus::pending:
        return "pending";
    case PairStatus::done:
        return "done";
    case PairStatus::failed:
        return "failed";
    case PairStatus::skipped:
        return "skipped";
    }
    return "pending";
}

std::optional<PairStatus> parse_pair_status(std::string_view text) {
    if (text == "pending")
        return PairStatus::pending;
    if (text == "done")
        return PairStatus::done;
    if (text == "failed")
        return PairStatus::failed;
    if (text == "skipped")
        return PairStatus::skipped;
    return std::nullopt;
}

PairState* BatchManifest::find(const std::string& mbti, int scenario_id) {
    for (PairState& p : pairs)
        if (p.mbti == mbti && p.scenario_id == scenario_id)
            return &p;
    return nullptr;
}

std::size_t BatchManifest::count(PairStatus status) const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(),
                      [&](const PairState& p) { return p.status == status; }));
}

BatchManifest build_manifest(const std::vector<persona::CharacterProfile>& roster,
                             const std::vector<scenario::Scenario>& scenarios,
                             const std::vector<std::string>& mbti_filter,
                             const std::vector<int>& scenario_filter) {
    std::set<std::string> wanted_codes;
    for (const std::string& code : mbti_filter)
        wanted_codes.insert(persona::parse_mbti(code).code());
    std::set<int> wanted_scenarios(scenario_filter.begin(), scenario_filter.end());
    for (int sid : wanted_scenarios) {
        bool known = std::any_of(scenarios.begin(), scenarios.end(),
                                 [&](const scenario::Scenario& s) { return s.id == sid; });
        if (!known)
            throw EmptySelection("scenario " + std::to_string(sid) + " is not in the catalog");
    }

    std::vector<std::string> codes;
    for (const persona::CharacterProfile& profile : roster) {
        std::string code = profile.mbti.code();
        if (wanted_codes.empty() || wanted_codes.contains(code))
            codes.push_back(code);
    }
    std::sort(codes.begin(), codes.end());

    std::vector<int> sids;
    for (const scenario::Scenario& s : scenarios)
        if (wanted_scenarios.empty() || wanted_scenarios.contains(s.id))
            sids.push_back(s.id);
    std::sort(sids.begin(), sids.end());

    if (codes.empty())
        throw EmptySelection("no roster profile matches the MBTI filter");
    if (sids.empty())
        throw EmptySelection("no scenario matches the scenario filter");

    BatchManifest manifest;
    for (const std::string& code : codes)
        for (int sid : sids) {
            PairState pair;
            pair.mbti = code;
            pair.scenario_id = sid;
            manifest.pairs.push_back(pair);
        }
    return manifest;
}

void to_json(json& j, const BatchManifest& m) {
    json pairs = json::array();
    for (const PairState& p : m.pairs)
        pairs.push_back({{"mbti", p.mbti},
                         {"scenario_id", p.scenario_id},
                         {"status", std::string(pair_status_name(p.status))},
                         {"detail", p.detail},
                         {"flag", p.flag},
                         {"attempts", p.attempts}});
    j = json{{"pairs", pairs}};
}

void from_json(const json& j, BatchManifest& m) {
    m.pairs.clear();
    for (const json& entry : j.at("pairs")) {
        PairState p;
        entry.at("mbti").get_to(p.mbti);
        entry.at("scenario_id").get_to(p.scenario_id);
        std::string status = entry.value("status", "pending");
        std::optional<PairStatus> parsed = parse_pair_status(status);
        if (!parsed)
            throw std::invalid_argument("unknown pair status \"" + status + "\"");
        p.status = *parsed;
        p.detail = entry.value("detail", std::string());
        p.flag = entry.value("flag", std::string());
        p.attempts = entry.value("attempts", 0);
        m.pairs.push_back(std::move(p));
    }
}

BatchManifest load_manifest(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw CorruptBundledData(path.string(), e.what());
    }
    return j.get<BatchManifest>();
}

void save_manifest(const BatchManifest& manifest, const std::filesystem::path& path) {
    json j = manifest;
    write_text_file(path, j.dump(2) + "\n");
}

const std::vector<PlausibilityRule>& default_plausibility_rules() {
    static const std::vector<PlausibilityRule> rules = {
        {"requires_driving_age", 16, {1}},
        {"requires_working_age", 16, {1, 3}},
        {"requires_adult_host", 18, {4}},
    };
    return rules;
}

std::optional<std::string> flag_implausible(const persona::CharacterProfile& profile,
                                            const scenario::Scenario& scen,
                                            const std::vector<PlausibilityRule>& rules) {
    for (const PlausibilityRule& rule : rules)
        if (rule.scenario_ids.contains(scen.id) && profile.age < rule.min_age)
            return rule.name;
    return std::nullopt;
}

namespace {

void run_parallel(std::size_t n_items, int max_threads, const std::function<void(std::size_t)>& fn) {
    if (n_items == 0)
        return;
    std::size_t n_threads =
        std::min<std::size_t>(n_items, static_cast<std::size_t>(std::max(1, max_threads)));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < n_items; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
        workers.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_items)
                    return;
                fn(i);
            }
        });
    for (std::thread& w : workers)
        w.join();
}

std::map<std::string, const persona::CharacterProfile*>
index_roster(const std::vector<persona::CharacterProfile>& roster) {
    std::map<std::string, const persona::CharacterProfile*> by_code;
    for (const persona::CharacterProfile& p : roster)
        by_code[p.mbti.code()] = &p;
    return by_code;
}

std::filesystem::path next_raw_path(const Workspace& ws, const std::string& mbti, int scenario_id,
                                    int& suffix) {
    while (true) {
        std::filesystem::path candidate =
            ws.raw_dir() / (mbti + "_" + std::to_string(scenario_id) + ".attempt" +
                            std::to_string(suffix) + ".txt");
        if (!std::filesystem::exists(candidate))
            return candidate;
        ++suffix;
    }
}

} // namespace

BatchResult run_batch(const Workspace& ws, const ExperimentConfig& config,
                      const std::vector<persona::CharacterProfile>& roster,
                      const std::vector<scenario::Scenario>& scenarios,
                      llm::ChatProvider& provider) {
    std::filesystem::create_directories(ws.raw_dir());

    BatchManifest manifest = std::filesystem::exists(ws.manifest_file())
                                 ? load_manifest(ws.manifest_file())
                                 : build_manifest(roster, scenarios, config.mbti_filter,
                                                  config.scenario_filter);

    std::map<std::string, const persona::CharacterProfile*> by_code = index_roster(roster);

    prompt::PromptEngine::Options prompt_options;
    if (!config.prompts_dir.empty())
        prompt_options.prompts_dir = config.prompts_dir;
    prompt_options.single_message = config.single_message_prompts;
    prompt_options.prefix_text = config.prefix_text;
    prompt::PromptEngine engine(prompt_options);

    // Flags are recomputed every run; skipping only happens when asked.
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < manifest.pairs.size(); ++i) {
        PairState& pair = manifest.pairs[i];
        auto profile_it = by_code.find(pair.mbti);
        if (profile_it == by_code.end()) {
            pair.status = PairStatus::failed;
            pair.detail = "no roster profile for " + pair.mbti;
            continue;
        }
        const scenario::Scenario* scen = nullptr;
        try {
            scen = &scenario::scenario_by_id(scenarios, pair.scenario_id);
        } catch (const std::out_of_range&) {
            pair.status = PairStatus::failed;
            pair.detail = "scenario " + std::to_string(pair.scenario_id) + " is not in the catalog";
            continue;
        }
        std::optional<std::string> flag = flag_implausible(*profile_it->second, *scen);
        pair.flag = flag.value_or("");
        if (flag && config.skip_flagged) {
            if (pair.status != PairStatus::done) {
                pair.status = PairStatus::skipped;
                pair.detail = "implausible pairing: " + *flag;
            }
            continue;
        }
        if (pair.status == PairStatus::skipped) {
            // Previously skipped but no longer excluded.
            pair.status = PairStatus::pending;
            pair.detail.clear();
        }
        if (pair.status == PairStatus::pending || pair.status == PairStatus::failed)
            todo.push_back(i);
    }

    std::mutex manifest_mutex;
    BatchResult result;
    result.executed = static_cast<int>(todo.size());

    run_parallel(todo.size(), config.max_concurrent_requests, [&](std::size_t k) {
        PairState snapshot;
        {
            std::lock_guard<std::mutex> lock(manifest_mutex);
            snapshot = manifest.pairs[todo[k]];
        }
        const persona::CharacterProfile& profile = *by_code.at(snapshot.mbti);
        const scenario::Scenario& scen = scenario::scenario_by_id(scenarios, snapshot.scenario_id);

        session::SessionConfig session_config;
        session_config.model_id = config.generation_model;
        session_config.temperature = config.generation_temperature;
        session_config.max_reasks = config.max_reasks;
        session_config.strict_protocol = config.strict_protocol;
        session_config.retry = config.retry;
        int suffix = 1;
        session_config.on_raw = [&](int, const std::string& raw) {
            write_text_file(next_raw_path(ws, snapshot.mbti, snapshot.scenario_id, suffix),
                                  raw);
            ++suffix;
        };

        PairStatus status;
        std::string detail;
        int attempts = 0;
        try {
            session::SessionRecord record =
                session::run_session(profile, scen, engine, provider, session_config);
            json j = record;
            write_text_file(ws.session_file(snapshot.mbti, snapshot.scenario_id),
                                  j.dump(2) + "\n");
            status = PairStatus::done;
            attempts = record.attempts;
        } catch (const session::SessionFailed& e) {
            status = PairStatus::failed;
            detail = e.what();
            attempts = 1 + std::max(0, config.max_reasks);
        } catch (const llm::ProviderError& e) {
            status = PairStatus::failed;
            detail = e.what();
        }

        std::lock_guard<std::mutex> lock(manifest_mutex);
        PairState& pair = manifest.pairs[todo[k]];
        pair.status = status;
        pair.detail = detail;
        pair.attempts = attempts;
        save_manifest(manifest, ws.manifest_file());
    });

    save_manifest(manifest, ws.manifest_file());
    result.done = static_cast<int>(manifest.count(PairStatus::done));
    result.failed = static_cast<int>(manifest.count(PairStatus::failed));
    result.skipped = static_cast<int>(manifest.count(PairStatus::skipped));
    return result;
}

BatchResult run_judge_batch(const Workspace& ws, const ExperimentConfig& config,
                            const std::vector<persona::CharacterProfile>& roster,
                            const std::vector<scenario::Scenario>& scenarios,
                            llm::ChatProvider& provider) {
    std::filesystem::create_directories(ws.verdicts_dir());

    std::map<std::string, const persona::CharacterProfile*> by_code = index_roster(roster);

    prompt::PromptEngine::Options prompt_options;
    if (!config.prompts_dir.empty())
        prompt_options.prompts_dir = config.prompts_dir;
    prompt::PromptEngine engine(prompt_options);

    struct Item {
        session::SessionRecord record;
    };
    std::vector<Item> todo;
    BatchResult result;

    std::vector<session::SessionRecord> sessions = load_sessions(ws);
    for (session::SessionRecord& record : sessions) {
        if (std::filesystem::exists(ws.verdict_file(record.mbti, record.scenario_id))) {
            ++result.done;
            continue;
        }
        if (!by_code.contains(record.mbti)) {
            ++result.failed;
            continue;
        }
        todo.push_back({std::move(record)});
    }
    result.executed = static_cast<int>(todo.size());

    std::mutex failures_mutex;
    json failures = json::array();
    std::atomic<int> done{result.done};
    std::atomic<int> failed{result.failed};

    run_parallel(todo.size(), config.max_concurrent_requests, [&](std::size_t k) {
        const session::SessionRecord& record = todo[k].record;
        const persona::CharacterProfile& profile = *by_code.at(record.mbti);
        const scenario::Scenario& scen = scenario::scenario_by_id(scenarios, record.scenario_id);

        judge::JudgeConfig judge_config;
        judge_config.model_id = config.judge_model;
        judge_config.temperature = config.judge_temperature;
        judge_config.max_reasks = config.max_reasks;
        judge_config.retry = config.retry;

        try {
            judge::JudgeVerdict verdict =
                judge::judge_case(profile, scen, record.transcript, engine, provider, judge_config);
            json j = verdict;
            write_text_file(ws.verdict_file(record.mbti, record.scenario_id),
                                  j.dump(2) + "\n");
            ++done;
        } catch (const std::exception& e) {
            ++failed;
            std::lock_guard<std::mutex> lock(failures_mutex);
            failures.push_back({{"mbti", record.mbti},
                                {"scenario_id", record.scenario_id},
                                {"error", e.what()}});
        }
    });

    write_text_file(ws.judge_failures_file(), failures.dump(2) + "\n");
    result.done = done.load();
    result.failed = failed.load();
    return result;
}

std::vector<persona::CharacterProfile> load_roster_for(const ExperimentConfig& config) {
    if (config.characters_dir.empty())
        return persona::bundled_roster();
    return persona::load_roster(config.characters_dir);
}

std::vector<scenario::Scenario> load_scenarios_for(const ExperimentConfig& config) {
    if (config.scenarios_file.empty())
        return scenario::bundled_scenarios();
    return scenario::load_catalog(config.scenarios_file);
}

namespace {

std::vector<std::filesystem::path> sorted_json_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::exists(dir))
        return files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

std::vector<judge::JudgeVerdict> load_verdicts(const Workspace& ws) {
    std::vector<judge::JudgeVerdict> verdicts;
    for (const std::filesystem::path& file : sorted_json_files(ws.verdicts_dir())) {
        if (file.filename() == "failures.json")
            continue;
        verdicts.push_back(json::parse(read_text_file(file)).get<judge::JudgeVerdict>());
    }
    return verdicts;
}

std::vector<session::SessionRecord> load_sessions(const Workspace& ws) {
    std::vector<session::SessionRecord> sessions;
    for (const std::filesystem::path& file : sorted_json_files(ws.sessions_dir())) {
        if (file.filename() == "manifest.json")
            continue;
        sessions.push_back(json::parse(read_text_file(file)).get<session::SessionRecord>());
    }
    return sessions;
}

json write_report(const Workspace& ws, const ExperimentConfig& config) {
    std::filesystem::create_directories(ws.reports_dir());

    json report;

    json session_counts = {{"total", 0}, {"pending", 0}, {"done", 0}, {"failed", 0}, {"skipped", 0}};
    json flagged = json::array();
    if (std::filesystem::exists(ws.manifest_file())) {
        BatchManifest manifest = load_manifest(ws.manifest_file());
        session_counts["total"] = manifest.pairs.size();
        session_counts["pending"] = manifest.count(PairStatus::pending);
        session_counts["done"] = manifest.count(PairStatus::done);
        session_counts["failed"] = manifest.count(PairStatus::failed);
        session_counts["skipped"] = manifest.count(PairStatus::skipped);
        for (const PairState& pair : manifest.pairs)
            if (!pair.flag.empty())
                flagged.push_back({{"mbti", pair.mbti},
                                   {"scenario_id", pair.scenario_id},
                                   {"rule", pair.flag}});
    }
    report["sessions"] = session_counts;
    report["flagged_pairs"] = flagged;

    std::vector<session::SessionRecord> sessions = load_sessions(ws);
    double turn_sum = 0;
    double word_sum = 0;
    std::size_t word_turns = 0;
    std::map<std::string, std::size_t> speaker_turns;
    for (const session::SessionRecord& record : sessions) {
        session::TranscriptStats stats = session::transcript_stats(record.transcript);
        turn_sum += static_cast<double>(stats.turn_count);
        word_sum += stats.mean_utterance_words * static_cast<double>(stats.turn_count);
        word_turns += stats.turn_count;
        for (const auto& [speaker, count] : stats.per_speaker)
            speaker_turns[std::string(session::speaker_key(speaker))] += count;
    }
    json transcripts = {{"count", sessions.size()}};
    transcripts["mean_turns"] =
        sessions.empty() ? 0.0 : turn_sum / static_cast<double>(sessions.size());
    transcripts["mean_utterance_words"] =
        word_turns == 0 ? 0.0 : word_sum / static_cast<double>(word_turns);
    json speaker_json = json::object();
    for (const auto& [speaker, count] : speaker_turns)
        speaker_json[speaker] = count;
    transcripts["speaker_turns"] = speaker_json;
    report["transcripts"] = transcripts;

    std::vector<judge::JudgeVerdict> verdicts = load_verdicts(ws);
    report["verdicts"] = {{"count", verdicts.size()}};
    if (std::filesystem::exists(ws.judge_failures_file()))
        report["verdicts"]["failures"] =
            json::parse(read_text_file(ws.judge_failures_file()));
    if (!verdicts.empty()) {
        judge::ScoreMatrix matrix = judge::aggregate_matrix(verdicts);
        judge::export_heatmap(matrix, ws.reports_dir() / "judge_matrix.csv",
                              ws.reports_dir() / "judge_matrix.plot.json");
        report["matrix_csv"] = "judge_matrix.csv";
        report["matrix_plot_spec"] = "judge_matrix.plot.json";
    } else {
        report["matrix_csv"] = nullptr;
        report["matrix_plot_spec"] = nullptr;
    }

    std::filesystem::path survey_summary = ws.reports_dir() / "survey_summary.json";
    report["survey_summary"] =
        std::filesystem::exists(survey_summary) ? json("survey_summary.json") : json(nullptr);

    json synthetic = json::array();
    try {
        for (const persona::CharacterProfile& profile : load_roster_for(config))
            if (profile.meta.description_synthetic || profile.meta.memories_synthetic)
                synthetic.push_back({{"mbti", profile.mbti.code()},
                                     {"description_synthetic", profile.meta.description_synthetic},
                                     {"memories_synthetic", profile.meta.memories_synthetic}});
    } catch (const std::exception&) {
        // Roster problems are reported by the validate command, not here.
    }
    report["synthetic_profiles"] = synthetic;

    write_text_file(ws.reports_dir() / "report.json", report.dump(2) + "\n");
    return report;
}

} // namespace consim::workspace
