#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace consim::llm {

enum class Role { system, user, assistant };

std::string_view role_name(Role r);
std::optional<Role> parse_role(std::string_view name);

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<Message> messages;
    double temperature = 1.0;
    std::optional<int> max_output;
    std::string request_tag;
};

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct ChatResponse {
    std::string content;
    std::string model_id;
    Usage usage;
    std::chrono::milliseconds latency{0};
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{100};
    double backoff_multiplier = 2.0;
    std::set<int> retryable_statuses = {429, 500, 502, 503, 504};
};

/// Delays slept between attempts: base * multiplier^i for i in
/// [0, max_attempts-1). Nondecreasing for multiplier >= 1.
std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& policy);

class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AuthError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class RateLimited : public ProviderError {
public:
    using ProviderError::ProviderError;
    static constexpr int kStatus = 429;
};

class TransportError : public ProviderError {
public:
    TransportError(const std::string& message, int status = 0)
        : ProviderError(message), status_(status) {}
    /// HTTP status; 0 for connection-level failures.
    int status() const { return status_; }

private:
    int status_;
};

/// The provider answered but refused to produce usable content
/// (safety filter, explicit refusal signal). Not retryable.
class ProviderRefusal : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class MissingFixture : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class ExhaustedRetries : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class StoreWriteError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// One attempt; throws a ProviderError subclass on failure.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;
using LogFn = std::function<void(const std::string&)>;

/// Runs the request with retries per policy. RateLimited and
/// TransportError retry when their status is in retryable_statuses
/// (connection failures, status 0, always retry); AuthError,
/// ProviderRefusal, and MissingFixture pass through. Exhausting
/// attempts raises ExhaustedRetries carrying the last failure.
/// Default sleep_fn really sleeps; tests inject a recorder.
ChatResponse chat_complete(ChatProvider& provider, const ChatRequest& request,
                           const RetryPolicy& policy = {}, const SleepFn& sleep_fn = {},
                           const LogFn& log_fn = {});

/// Stable key over model_id + messages + temperature (16 hex digits).
/// max_output and request_tag are excluded so logging concerns never
/// change the key.
std::string request_digest(const ChatRequest& request);

/// Directory of <digest>.json fixtures, each holding {request, response}.
class FixtureStore {
public:
    explicit FixtureStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    /// Persists the pair and returns the digest key. Throws
    /// StoreWriteError.
    std::string record(const ChatRequest& request, const ChatResponse& response);

    std::optional<ChatResponse> find_by_digest(const std::string& digest) const;

    /// Falls back to the request_tag recorded inside each fixture;
    /// first match in filename order.
    std::optional<ChatResponse> find_by_tag(const std::string& tag) const;

    std::size_t size() const;

private:
    std::filesystem::path dir_;
};

/// Deterministic provider answering from a FixtureStore: exact digest
/// first, then request_tag. Throws MissingFixture.
class ReplayProvider : public ChatProvider {
public:
    explicit ReplayProvider(FixtureStore store);

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return "replay"; }

    /// Total completed lookups, for call-count assertions.
    int calls() const;

private:
    FixtureStore store_;
    mutable std::mutex mutex_;
    int calls_ = 0;
};

/// Pass-through decorator that records every successful completion.
class RecordingProvider : public ChatProvider {
public:
    RecordingProvider(ChatProvider& inner, FixtureStore& store) : inner_(inner), store_(store) {}

    ChatResponse complete(const ChatRequest& request) override {
        ChatResponse response = inner_.complete(request);
        store_.record(request, response);
        return response;
    }
    std::string name() const override { return inner_.name() + "+recording"; }

private:
    ChatProvider& inner_;
    FixtureStore& store_;
};

/// Decorator bounding concurrent complete() calls; tracks the observed
/// peak so tests can assert the bound held.
class ConcurrencyLimitedProvider : public ChatProvider {
public:
    ConcurrencyLimitedProvider(ChatProvider& inner, int max_in_flight);

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return inner_.name(); }

    int peak_in_flight() const;

private:
    ChatProvider& inner_;
    int limit_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    int peak_ = 0;
};

struct HttpProviderConfig {
    std::string base_url = "https://api.openai.com";
    std::string completions_path = "/v1/chat/completions";
    std::string api_key_env = "CONSIM_API_KEY";
    int connect_timeout_seconds = 10;
    int read_timeout_seconds = 120;
};

/// Chat-completions HTTP client (bearer auth, JSON body). Message
/// content goes on the wire byte-exact.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config);

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return "http:" + config_.base_url; }

private:
    HttpProviderConfig config_;
};

} // namespace consim::llm
