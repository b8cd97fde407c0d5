#include <chrono>
#include <cstdlib>

#ifdef CONSIM_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <nlohmann/json.hpp>

#include "consim/llm.hpp"

namespace consim::llm {

using nlohmann::json;

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {}

ChatResponse HttpChatProvider::complete(const ChatRequest& request) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
        throw AuthError("API key env var " + config_.api_key_env + " is not set");
    }

    json body{{"model", request.model_id}, {"temperature", request.temperature}};
    json messages = json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    if (request.max_output) body["max_tokens"] = *request.max_output;

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.connect_timeout_seconds, 0);
    client.set_read_timeout(config_.read_timeout_seconds, 0);
    client.set_bearer_token_auth(key);

    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(config_.completions_path, body.dump(), "application/json");
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (!result) {
        throw TransportError("connection to " + config_.base_url +
                                 " failed: " + httplib::to_string(result.error()),
                             0);
    }
    if (result->status == 401 || result->status == 403) {
        throw AuthError("authentication rejected (HTTP " + std::to_string(result->status) + ")");
    }
    if (result->status == 429) {
        throw RateLimited("rate limited (HTTP 429): " + result->body);
    }
    if (result->status < 200 || result->status >= 300) {
        throw TransportError("HTTP " + std::to_string(result->status) + ": " + result->body,
                             result->status);
    }

    json payload;
    try {
        payload = json::parse(result->body);
    } catch (const std::exception& e) {
        throw TransportError(std::string("unparseable completion body: ") + e.what(),
                             result->status);
    }

    ChatResponse response;
    response.latency = latency;
    response.model_id = payload.value("model", request.model_id);
    try {
        const json& choice = payload.at("choices").at(0);
        response.content = choice.at("message").at("content").get<std::string>();
        if (choice.value("finish_reason", "") == "content_filter") {
            throw ProviderRefusal("completion blocked by provider content filter");
        }
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed completion payload: ") + e.what(),
                             result->status);
    }
    if (response.content.empty()) {
        throw ProviderRefusal("provider returned an empty completion");
    }
    if (payload.contains("usage")) {
        response.usage.input_tokens = payload["usage"].value("prompt_tokens", std::int64_t{0});
        response.usage.output_tokens =
            payload["usage"].value("completion_tokens", std::int64_t{0});
    }
    return response;
}

} // namespace consim::llm
