#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "consim/judge.hpp"
#include "consim/llm.hpp"
#include "consim/persona.hpp"
#include "consim/scenario.hpp"
#include "consim/session.hpp"
#include "consim/survey.hpp"
#include "consim/util.hpp"
#include "consim/workspace.hpp"

namespace {

namespace ws = consim::workspace;
namespace llm = consim::llm;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct GlobalOptions {
    std::string workspace_dir = ".";
    std::string config_path;
};

ws::ExperimentConfig resolve_config(const GlobalOptions& global, const ws::Workspace& workspace) {
    std::filesystem::path path = global.config_path.empty()
                                     ? workspace.config_file()
                                     : std::filesystem::path(global.config_path);
    if (std::filesystem::exists(path))
        return ws::load_config(path);
    return ws::ExperimentConfig{};
}

/// Owns whichever provider stack the config asks for.
struct ProviderStack {
    std::unique_ptr<llm::FixtureStore> store;
    std::unique_ptr<llm::ChatProvider> base;
    std::unique_ptr<llm::ChatProvider> recorder;

    llm::ChatProvider& provider() { return recorder ? *recorder : *base; }
};

ProviderStack make_provider(const ws::ExperimentConfig& config, const ws::Workspace& workspace,
                            bool record) {
    ProviderStack stack;
    stack.store = std::make_unique<llm::FixtureStore>(workspace.fixtures_dir());
    if (config.provider == "replay") {
        stack.base = std::make_unique<llm::ReplayProvider>(*stack.store);
    } else if (config.provider == "http") {
        llm::HttpProviderConfig http;
        http.base_url = config.base_url;
        http.api_key_env = config.api_key_env;
        stack.base = std::make_unique<llm::HttpChatProvider>(http);
        if (record)
            stack.recorder = std::make_unique<llm::RecordingProvider>(*stack.base, *stack.store);
    } else {
        throw std::runtime_error("unknown provider \"" + config.provider +
                                 "\" (expected \"replay\" or \"http\")");
    }
    return stack;
}

int cmd_characters_list(const ws::ExperimentConfig& config) {
    for (const auto& profile : ws::load_roster_for(config))
        std::cout << profile.mbti.code() << "  " << profile.name << ", " << profile.age << ", "
                  << profile.gender << ", " << profile.location << "\n";
    return kExitOk;
}

int cmd_characters_validate(const ws::ExperimentConfig& config) {
    std::vector<consim::persona::CharacterProfile> roster = ws::load_roster_for(config);
    bool all_ok = true;
    for (const auto& profile : roster) {
        consim::persona::ValidationReport report = consim::persona::validate_profile(profile);
        if (report.ok())
            continue;
        all_ok = false;
        for (const auto& violation : report.violations)
            std::cout << profile.mbti.code() << ": " << violation.field << ": " << violation.reason
                      << "\n";
    }
    if (all_ok)
        std::cout << roster.size() << " profiles valid\n";
    return all_ok ? kExitOk : kExitFatal;
}

int cmd_scenarios_list(const ws::ExperimentConfig& config) {
    for (const auto& scen : ws::load_scenarios_for(config)) {
        std::cout << scen.id << "  [";
        bool first = true;
        for (auto attr : scen.attributes) {
            if (!first)
                std::cout << ", ";
            std::cout << consim::scenario::attribute_name(attr);
            first = false;
        }
        std::cout << "]\n   " << scen.text << "\n";
    }
    return kExitOk;
}

int cmd_run(const GlobalOptions& global, const std::string& mbti, int scenario_id, bool record) {
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();
    ws::ExperimentConfig config = resolve_config(global, workspace);

    auto roster = ws::load_roster_for(config);
    auto scenarios = ws::load_scenarios_for(config);
    std::string code = consim::persona::parse_mbti(mbti).code();
    const consim::persona::CharacterProfile* profile = nullptr;
    for (const auto& p : roster)
        if (p.mbti.code() == code)
            profile = &p;
    if (profile == nullptr)
        throw std::runtime_error("no roster profile for " + code);
    const consim::scenario::Scenario& scen =
        consim::scenario::scenario_by_id(scenarios, scenario_id);

    if (auto flag = ws::flag_implausible(*profile, scen))
        std::cerr << "warning: implausible pairing (" << *flag << "); running anyway\n";

    ProviderStack stack = make_provider(config, workspace, record);

    consim::prompt::PromptEngine::Options prompt_options;
    if (!config.prompts_dir.empty())
        prompt_options.prompts_dir = config.prompts_dir;
    prompt_options.single_message = config.single_message_prompts;
    prompt_options.prefix_text = config.prefix_text;
    consim::prompt::PromptEngine engine(prompt_options);

    consim::session::SessionConfig session_config;
    session_config.model_id = config.generation_model;
    session_config.temperature = config.generation_temperature;
    session_config.max_reasks = config.max_reasks;
    session_config.strict_protocol = config.strict_protocol;
    session_config.retry = config.retry;

    consim::session::SessionRecord rec =
        consim::session::run_session(*profile, scen, engine, stack.provider(), session_config);
    json j = rec;
    std::filesystem::path out = workspace.session_file(rec.mbti, rec.scenario_id);
    consim::write_text_file(out, j.dump(2) + "\n");

    std::cout << consim::session::serialize_transcript(rec.transcript);
    std::cout << "\nsaved " << out.string() << " (attempt " << rec.attempts << ")\n";
    return kExitOk;
}

int cmd_batch(const GlobalOptions& global, bool record) {
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();
    ws::ExperimentConfig config = resolve_config(global, workspace);
    auto roster = ws::load_roster_for(config);
    auto scenarios = ws::load_scenarios_for(config);
    ProviderStack stack = make_provider(config, workspace, record);

    ws::BatchResult result =
        ws::run_batch(workspace, config, roster, scenarios, stack.provider());
    std::cout << "executed " << result.executed << ", done " << result.done << ", failed "
              << result.failed << ", skipped " << result.skipped << "\n";
    return result.failed == 0 ? kExitOk : kExitPartial;
}

int cmd_judge(const GlobalOptions& global, bool record) {
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();
    ws::ExperimentConfig config = resolve_config(global, workspace);
    auto roster = ws::load_roster_for(config);
    auto scenarios = ws::load_scenarios_for(config);
    ProviderStack stack = make_provider(config, workspace, record);

    ws::BatchResult result =
        ws::run_judge_batch(workspace, config, roster, scenarios, stack.provider());
    std::cout << "executed " << result.executed << ", verdicts " << result.done << ", failed "
              << result.failed << "\n";
    return result.failed == 0 ? kExitOk : kExitPartial;
}

int cmd_report(const GlobalOptions& global) {
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();
    ws::ExperimentConfig config = resolve_config(global, workspace);
    json report = ws::write_report(workspace, config);
    std::cout << report["sessions"]["done"].get<std::size_t>() << " sessions done, "
              << report["verdicts"]["count"].get<std::size_t>() << " verdicts\n"
              << "wrote " << (workspace.reports_dir() / "report.json").string() << "\n";
    return kExitOk;
}

int cmd_survey(const GlobalOptions& global, const std::string& input, double threshold,
               double floor, const std::string& reference,
               const std::vector<std::string>& exclude) {
    namespace survey = consim::survey;
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();

    std::vector<survey::SurveyRecord> records = survey::read_survey_csv(input);
    survey::ExclusionResult exclusion = survey::apply_exclusion(records, threshold);

    survey::SummarizeOptions options;
    options.exclude_mbti = exclude;
    options.reference_mbti = reference;
    survey::SurveySummary summary = survey::summarize(exclusion.retained, options);
    std::vector<std::string> flagged = survey::flag_below(summary, floor);

    survey::write_summary_json(summary, workspace.reports_dir() / "survey_summary.json");
    survey::write_long_csv(exclusion.retained, workspace.reports_dir() / "survey_long.csv");

    std::cout << records.size() << " records, " << exclusion.retained.size() << " retained, "
              << exclusion.excluded_participants.size() << " participants excluded\n";
    std::cout << "below " << floor << ":";
    for (const std::string& code : flagged)
        std::cout << " " << code;
    std::cout << "\nwrote " << (workspace.reports_dir() / "survey_summary.json").string() << "\n";
    return kExitOk;
}

int cmd_fixtures_record(const GlobalOptions& global, const std::string& request_file,
                        const std::string& response_file, const std::string& response_text) {
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();

    json j = json::parse(consim::read_text_file(request_file));
    llm::ChatRequest request;
    request.model_id = j.value("model_id", request.model_id);
    request.temperature = j.value("temperature", request.temperature);
    request.request_tag = j.value("request_tag", std::string());
    if (j.contains("max_output"))
        request.max_output = j["max_output"].get<int>();
    for (const json& m : j.at("messages")) {
        std::optional<llm::Role> role = llm::parse_role(m.at("role").get<std::string>());
        if (!role)
            throw std::runtime_error("unknown role in request file: " +
                                     m.at("role").get<std::string>());
        request.messages.push_back({*role, m.at("content").get<std::string>()});
    }

    llm::ChatResponse response;
    response.model_id = request.model_id;
    response.content =
        response_file.empty() ? response_text : consim::read_text_file(response_file);

    llm::FixtureStore store(workspace.fixtures_dir());
    std::string digest = store.record(request, response);
    std::cout << digest << "\n";
    return kExitOk;
}

int cmd_init(const GlobalOptions& global) {
    ws::Workspace workspace{global.workspace_dir};
    workspace.init();
    std::cout << "initialized " << std::filesystem::absolute(workspace.root()).string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"character simulation and evaluation pipeline"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("-w,--workspace", global.workspace_dir, "workspace directory")
        ->capture_default_str();
    app.add_option("-c,--config", global.config_path, "config file (default <workspace>/config.json)");

    CLI::App* init = app.add_subcommand("init", "create the workspace layout");

    CLI::App* characters = app.add_subcommand("characters", "roster operations");
    characters->require_subcommand(1);
    CLI::App* characters_list = characters->add_subcommand("list", "print the roster");
    CLI::App* characters_validate =
        characters->add_subcommand("validate", "check every profile against the schema");

    CLI::App* scenarios = app.add_subcommand("scenarios", "scenario operations");
    scenarios->require_subcommand(1);
    CLI::App* scenarios_list = scenarios->add_subcommand("list", "print the catalog");

    CLI::App* run = app.add_subcommand("run", "run one character x scenario session");
    std::string run_mbti;
    int run_scenario = 0;
    bool run_record = false;
    run->add_option("--mbti", run_mbti, "MBTI code")->required();
    run->add_option("--scenario", run_scenario, "scenario id")->required();
    run->add_flag("--record", run_record, "record fixtures when using the http provider");

    CLI::App* batch = app.add_subcommand("batch", "run all pending pairs");
    bool batch_record = false;
    batch->add_flag("--record", batch_record, "record fixtures when using the http provider");

    CLI::App* judge = app.add_subcommand("judge", "evaluate stored sessions");
    bool judge_record = false;
    judge->add_flag("--record", judge_record, "record fixtures when using the http provider");

    CLI::App* report = app.add_subcommand("report", "aggregate results into reports/");

    CLI::App* survey = app.add_subcommand("survey", "survey analytics");
    survey->require_subcommand(1);
    CLI::App* survey_analyze = survey->add_subcommand("analyze", "summarize a survey CSV");
    std::string survey_input;
    double survey_threshold = 10.0;
    double survey_floor = 4.0;
    std::string survey_reference = "ENFJ";
    std::vector<std::string> survey_exclude;
    survey_analyze->add_option("--input", survey_input, "survey CSV file")->required();
    survey_analyze->add_option("--threshold", survey_threshold, "completion-time cutoff, minutes")
        ->capture_default_str();
    survey_analyze->add_option("--floor", survey_floor, "flag types with mean below this")
        ->capture_default_str();
    survey_analyze->add_option("--reference", survey_reference, "contrast reference type")
        ->capture_default_str();
    survey_analyze->add_option("--exclude-mbti", survey_exclude,
                               "types removed from the second per-scenario pass");

    CLI::App* fixtures = app.add_subcommand("fixtures", "fixture store operations");
    fixtures->require_subcommand(1);
    CLI::App* fixtures_record =
        fixtures->add_subcommand("record", "store a request/response pair for replay");
    std::string fixtures_request;
    std::string fixtures_response_file;
    std::string fixtures_response_text;
    fixtures_record->add_option("--request", fixtures_request, "request JSON file")->required();
    CLI::Option* resp_file = fixtures_record->add_option(
        "--response-file", fixtures_response_file, "reply text file");
    fixtures_record->add_option("--response-text", fixtures_response_text, "reply text inline")
        ->excludes(resp_file);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*init)
            return cmd_init(global);
        if (*characters_list || *characters_validate || *scenarios_list) {
            ws::Workspace workspace{global.workspace_dir};
            ws::ExperimentConfig config = resolve_config(global, workspace);
            if (*characters_list)
                return cmd_characters_list(config);
            if (*characters_validate)
                return cmd_characters_validate(config);
            return cmd_scenarios_list(config);
        }
        if (*run)
            return cmd_run(global, run_mbti, run_scenario, run_record);
        if (*batch)
            return cmd_batch(global, batch_record);
        if (*judge)
            return cmd_judge(global, judge_record);
        if (*report)
            return cmd_report(global);
        if (*survey_analyze)
            return cmd_survey(global, survey_input, survey_threshold, survey_floor,
                              survey_reference, survey_exclude);
        if (*fixtures_record)
            return cmd_fixtures_record(global, fixtures_request, fixtures_response_file,
                                       fixtures_response_text);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
