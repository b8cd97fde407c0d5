#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "consim/judge.hpp"
#include "consim/llm.hpp"
#include "consim/persona.hpp"
#include "consim/scenario.hpp"
#include "consim/session.hpp"
#include "consim/survey.hpp"

namespace consim::workspace {

struct ExperimentConfig {
    /// "http" for a live endpoint, "replay" for recorded fixtures.
    std::string provider = "replay";
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "CONSIM_API_KEY";
    std::string generation_model = "gpt-4";
    std::string judge_model = "gpt-4";
    double generation_temperature = 1.0;
    double judge_temperature = 0.0;
    int max_concurrent_requests = 4;
    int max_reasks = 1;
    bool strict_protocol = true;
    bool single_message_prompts = false;
    std::string prefix_text;
    llm::RetryPolicy retry;
    /// Empty means the bundled data.
    std::string characters_dir;
    std::string scenarios_file;
    std::string prompts_dir;
    /// Empty filters mean everything.
    std::vector<std::string> mbti_filter;
    std::vector<int> scenario_filter;
    bool skip_flagged = false;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Directory layout of one experiment run.
class Workspace {
public:
    explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path config_file() const { return root_ / "config.json"; }
    std::filesystem::path sessions_dir() const { return root_ / "sessions"; }
    std::filesystem::path raw_dir() const { return root_ / "sessions" / "raw"; }
    std::filesystem::path manifest_file() const { return root_ / "sessions" / "manifest.json"; }
    std::filesystem::path verdicts_dir() const { return root_ / "verdicts"; }
    std::filesystem::path judge_failures_file() const {
        return root_ / "verdicts" / "failures.json";
    }
    std::filesystem::path reports_dir() const { return root_ / "reports"; }
    std::filesystem::path fixtures_dir() const { return root_ / "fixtures"; }

    std::filesystem::path session_file(const std::string& mbti, int scenario_id) const {
        return sessions_dir() / session::session_filename(mbti, scenario_id);
    }
    std::filesystem::path verdict_file(const std::string& mbti, int scenario_id) const {
        return verdicts_dir() / judge::verdict_filename(mbti, scenario_id);
    }

    /// Creates the directory tree; writes a default config if absent.
    void init() const;

private:
    std::filesystem::path root_;
};

enum class PairStatus { pending, done, failed, skipped };

std::string_view pair_status_name(PairStatus s);
std::optional<PairStatus> parse_pair_status(std::string_view text);

struct PairState {
    std::string mbti;
    int scenario_id = 0;
    PairStatus status = PairStatus::pending;
    /// Last failure message or skip reason.
    std::string detail;
    /// Plausibility rule name when flagged, empty otherwise.
    std::string flag;
    int attempts = 0;
};

struct BatchManifest {
    std::vector<PairState> pairs;

    PairState* find(const std::string& mbti, int scenario_id);
    std::size_t count(PairStatus status) const;
};

class EmptySelection : public std::runtime_error {
public:
    explicit EmptySelection(const std::string& why)
        : std::runtime_error("selection is empty: " + why) {}
};

/// All character x scenario pairs, MBTI codes alphabetical and
/// scenario ids ascending within each code. Filters narrow the grid.
BatchManifest build_manifest(const std::vector<persona::CharacterProfile>& roster,
                             const std::vector<scenario::Scenario>& scenarios,
                             const std::vector<std::string>& mbti_filter = {},
                             const std::vector<int>& scenario_filter = {});

void to_json(nlohmann::json& j, const BatchManifest& m);
void from_json(const nlohmann::json& j, BatchManifest& m);

BatchManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const BatchManifest& manifest, const std::filesystem::path& path);

/// Age gate on a set of scenarios; first matching rule wins.
struct PlausibilityRule {
    std::string name;
    int min_age = 0;
    std::set<int> scenario_ids;
};

const std::vector<PlausibilityRule>& default_plausibility_rules();

/// Name of the first rule the pairing violates, if any.
std::optional<std::string> flag_implausible(
    const persona::CharacterProfile& profile, const scenario::Scenario& scen,
    const std::vector<PlausibilityRule>& rules = default_plausibility_rules());

struct BatchResult {
    /// Pairs run during this invocation (not carried over from earlier runs).
    int executed = 0;
    int done = 0;
    int failed = 0;
    int skipped = 0;

    bool all_done() const { return failed == 0 && skipped == 0; }
};

/// Runs every pending or previously failed pair through the provider,
/// up to config.max_concurrent_requests in flight. Done pairs cost
/// nothing on rerun. Raw model output lands under sessions/raw/ with a
/// fresh attempt suffix; existing raw files are never rewritten.
BatchResult run_batch(const Workspace& ws, const ExperimentConfig& config,
                      const std::vector<persona::CharacterProfile>& roster,
                      const std::vector<scenario::Scenario>& scenarios,
                      llm::ChatProvider& provider);

/// Judges every stored session that has no verdict file yet.
BatchResult run_judge_batch(const Workspace& ws, const ExperimentConfig& config,
                            const std::vector<persona::CharacterProfile>& roster,
                            const std::vector<scenario::Scenario>& scenarios,
                            llm::ChatProvider& provider);

/// Loads characters/scenarios as configured, bundled data by default.
std::vector<persona::CharacterProfile> load_roster_for(const ExperimentConfig& config);
std::vector<scenario::Scenario> load_scenarios_for(const ExperimentConfig& config);

std::vector<judge::JudgeVerdict> load_verdicts(const Workspace& ws);
std::vector<session::SessionRecord> load_sessions(const Workspace& ws);

/// Aggregates batch status, transcript statistics, the score matrix
/// and flagged pairings into reports/report.json and returns it.
nlohmann::json write_report(const Workspace& ws, const ExperimentConfig& config);

} // namespace consim::workspace
