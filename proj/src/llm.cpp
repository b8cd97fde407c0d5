#include "consim/llm.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>

#include <nlohmann/json.hpp>

#include "consim/util.hpp"

namespace consim::llm {

using nlohmann::json;

std::string_view role_name(Role r) {
    switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "";
}

std::optional<Role> parse_role(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    return std::nullopt;
}

std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& policy) {
    std::vector<std::chrono::milliseconds> delays;
    double delay = static_cast<double>(policy.base_backoff.count());
    for (int i = 1; i < policy.max_attempts; ++i) {
        delays.emplace_back(static_cast<std::int64_t>(delay));
        delay *= policy.backoff_multiplier;
    }
    return delays;
}

ChatResponse chat_complete(ChatProvider& provider, const ChatRequest& request,
                           const RetryPolicy& policy, const SleepFn& sleep_fn,
                           const LogFn& log_fn) {
    auto log = [&](const std::string& message) {
        if (log_fn) log_fn("[" + request.request_tag + "] " + message);
    };
    auto delays = backoff_schedule(policy);

    std::string last_error;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        try {
            ChatResponse response = provider.complete(request);
            log("attempt " + std::to_string(attempt) + " ok");
            return response;
        } catch (const RateLimited& e) {
            if (!policy.retryable_statuses.contains(RateLimited::kStatus)) throw;
            last_error = e.what();
        } catch (const TransportError& e) {
            bool retryable =
                e.status() == 0 || policy.retryable_statuses.contains(e.status());
            if (!retryable) throw;
            last_error = e.what();
        }
        log("attempt " + std::to_string(attempt) + " failed: " + last_error);
        if (attempt < policy.max_attempts) {
            auto delay = delays[static_cast<std::size_t>(attempt - 1)];
            if (sleep_fn) {
                sleep_fn(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        }
    }
    throw ExhaustedRetries("gave up after " + std::to_string(policy.max_attempts) +
                           " attempt(s); last error: " + last_error);
}

std::string request_digest(const ChatRequest& request) {
    std::string canonical = "model=" + request.model_id + '\x1f';
    for (const Message& m : request.messages) {
        canonical += role_name(m.role);
        canonical += '\x1e';
        canonical += m.content;
        canonical += '\x1f';
    }
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6g", request.temperature);
    canonical += "temp=";
    canonical += temp;
    return hex64(fnv1a64(canonical));
}

namespace {

json request_to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    json j{{"model_id", request.model_id},
           {"messages", std::move(messages)},
           {"temperature", request.temperature},
           {"request_tag", request.request_tag}};
    if (request.max_output) j["max_output"] = *request.max_output;
    return j;
}

ChatResponse response_from_json(const json& j) {
    ChatResponse response;
    response.content = j.at("content").get<std::string>();
    response.model_id = j.value("model_id", "");
    if (j.contains("usage")) {
        response.usage.input_tokens = j["usage"].value("input_tokens", std::int64_t{0});
        response.usage.output_tokens = j["usage"].value("output_tokens", std::int64_t{0});
    }
    return response;
}

} // namespace

FixtureStore::FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string FixtureStore::record(const ChatRequest& request, const ChatResponse& response) {
    const std::string digest = request_digest(request);
    json doc{{"digest", digest},
             {"request", request_to_json(request)},
             {"response",
              {{"content", response.content},
               {"model_id", response.model_id},
               {"usage",
                {{"input_tokens", response.usage.input_tokens},
                 {"output_tokens", response.usage.output_tokens}}}}}};
    try {
        write_text_file(dir_ / (digest + ".json"), doc.dump(2) + "\n");
    } catch (const IoError& e) {
        throw StoreWriteError(e.what());
    }
    return digest;
}

std::optional<ChatResponse> FixtureStore::find_by_digest(const std::string& digest) const {
    const auto path = dir_ / (digest + ".json");
    if (!std::filesystem::is_regular_file(path)) return std::nullopt;
    return response_from_json(json::parse(read_text_file(path)).at("response"));
}

std::optional<ChatResponse> FixtureStore::find_by_tag(const std::string& tag) const {
    if (tag.empty() || !std::filesystem::is_directory(dir_)) return std::nullopt;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        json doc = json::parse(read_text_file(file));
        if (doc.contains("request") && doc["request"].value("request_tag", "") == tag) {
            return response_from_json(doc.at("response"));
        }
    }
    return std::nullopt;
}

std::size_t FixtureStore::size() const {
    if (!std::filesystem::is_directory(dir_)) return 0;
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") ++n;
    }
    return n;
}

ReplayProvider::ReplayProvider(FixtureStore store) : store_(std::move(store)) {}

ChatResponse ReplayProvider::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        ++calls_;
    }
    const std::string digest = request_digest(request);
    if (auto response = store_.find_by_digest(digest)) return *response;
    if (auto response = store_.find_by_tag(request.request_tag)) return *response;
    throw MissingFixture("no fixture for digest " + digest + " or tag \"" + request.request_tag +
                         "\" in " + store_.dir().string());
}

int ReplayProvider::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

ConcurrencyLimitedProvider::ConcurrencyLimitedProvider(ChatProvider& inner, int max_in_flight)
    : inner_(inner), limit_(std::max(1, max_in_flight)) {}

ChatResponse ConcurrencyLimitedProvider::complete(const ChatRequest& request) {
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return in_flight_ < limit_; });
        ++in_flight_;
        peak_ = std::max(peak_, in_flight_);
    }
    try {
        ChatResponse response = inner_.complete(request);
        std::lock_guard lock(mutex_);
        --in_flight_;
        cv_.notify_one();
        return response;
    } catch (...) {
        std::lock_guard lock(mutex_);
        --in_flight_;
        cv_.notify_one();
        throw;
    }
}

int ConcurrencyLimitedProvider::peak_in_flight() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

} // namespace consim::llm
