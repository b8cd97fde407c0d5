#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "consim/llm.hpp"
#include "consim/persona.hpp"
#include "consim/util.hpp"

namespace testsupport {

inline std::filesystem::path support_dir() {
    return std::filesystem::path(CONSIM_TEST_SUPPORT_DIR);
}

inline std::string read_support(const std::string& name) {
    return consim::read_text_file(support_dir() / name);
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("consim_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Provider driven by a script: either a flat list of steps consumed in
/// order, or a per-tag script. A step is a reply or an exception.
class ScriptedProvider : public consim::llm::ChatProvider {
public:
    using Step = std::function<consim::llm::ChatResponse(const consim::llm::ChatRequest&)>;

    static Step reply(std::string content) {
        return [content = std::move(content)](const consim::llm::ChatRequest&) {
            consim::llm::ChatResponse response;
            response.content = content;
            response.model_id = "scripted";
            return response;
        };
    }

    template <typename Error> static Step fail(std::string message) {
        return [message = std::move(message)](const consim::llm::ChatRequest&) -> consim::llm::ChatResponse {
            throw Error(message);
        };
    }

    void push(Step step) { steps_.push_back(std::move(step)); }
    void push_reply(std::string content) { push(reply(std::move(content))); }
    void set_tag_reply(const std::string& tag, std::string content) {
        tag_replies_[tag] = std::move(content);
    }

    consim::llm::ChatResponse complete(const consim::llm::ChatRequest& request) override {
        std::lock_guard<std::mutex> lock(mutex_);
        ++calls_;
        last_request_ = request;
        if (!steps_.empty()) {
            Step step = steps_.front();
            steps_.erase(steps_.begin());
            return step(request);
        }
        auto it = tag_replies_.find(request.request_tag);
        if (it == tag_replies_.end())
            throw consim::llm::MissingFixture("no scripted reply for tag \"" +
                                              request.request_tag + "\"");
        consim::llm::ChatResponse response;
        response.content = it->second;
        response.model_id = "scripted";
        return response;
    }

    std::string name() const override { return "scripted"; }

    int calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return calls_;
    }
    consim::llm::ChatRequest last_request() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return last_request_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<Step> steps_;
    std::map<std::string, std::string> tag_replies_;
    consim::llm::ChatRequest last_request_;
    int calls_ = 0;
};

inline consim::persona::CharacterProfile make_profile(const std::string& code,
                                                      const std::string& name, int age) {
    consim::persona::CharacterProfile p;
    p.name = name;
    p.age = age;
    p.gender = "female";
    p.location = "Test Town";
    p.mbti = consim::persona::parse_mbti(code);
    p.description = "A test profile for " + name + ".";
    p.memories.long_term = {"Long ago, " + name + " learned to test."};
    p.memories.short_term = {"Yesterday, " + name + " wrote a test."};
    p.status = {7, 7, 8, 8};
    return p;
}

/// A dialogue reply the parser accepts, with per-speaker texture.
inline std::string valid_dialogue(const std::string& topic) {
    return "Self-awareness: \"Let us think about " + topic + " clearly.\"\n"
           "Preconsciousness: \"There is a memory connected to " + topic + ".\"\n"
           "Unconsciousness: \"A quiet feeling stirs about " + topic + ".\"\n"
           "Self-awareness: \"Then the path forward is decided.\"\n"
           "Final Action: (Composed) Say, \"I will handle " + topic + " now,\" and begin.\n";
}

} // namespace testsupport
