#pragma once

#include "honeywire/serialization.hpp"

#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace honeywire {

// Hint for offline models; real chat-completion endpoints ignore it.
enum class ChatTask { Generic, Synonyms, Relevance, Engagement };

struct ChatTurn {
    std::string role;  // "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    ChatTask task = ChatTask::Generic;
    std::string system;
    std::vector<ChatTurn> turns;

    std::string flattened() const;
};

struct ChatCompletion {
    std::string text;
    bool refused = false;  // set when the backend reports a refusal explicitly
};

class ChatModel {
public:
    virtual ~ChatModel() = default;
    // Throws LlmUnavailable when the backend cannot be reached.
    virtual ChatCompletion complete(const ChatRequest& request) = 0;
};

std::vector<std::string> default_refusal_phrases();

// Adapter refusal flag first, then case-insensitive phrase match.
bool is_refusal(const ChatCompletion& completion, const std::vector<std::string>& phrases);

// Test double: replays a fixed queue of responses and records every request.
class ScriptedChatModel final : public ChatModel {
public:
    enum class Action { Reply, Refuse, Unavailable, Echo };
    struct Step {
        Action action = Action::Reply;
        std::string text;
    };

    ScriptedChatModel() = default;
    explicit ScriptedChatModel(std::vector<Step> steps, Step fallback = {Action::Echo, {}});

    static Step reply(std::string text) { return {Action::Reply, std::move(text)}; }
    static Step refuse(std::string text = "I'm sorry, but I can't help with that.") {
        return {Action::Refuse, std::move(text)};
    }
    static Step unavailable() { return {Action::Unavailable, {}}; }
    static Step echo() { return {Action::Echo, {}}; }

    void push(Step step);
    ChatCompletion complete(const ChatRequest& request) override;

    std::vector<ChatRequest> requests() const;

private:
    std::deque<Step> steps_;
    Step fallback_{Action::Echo, {}};
    std::vector<ChatRequest> requests_;
    mutable std::mutex mutex_;
};

struct SimulatedCustomerConfig {
    // Requests containing any of these (case-insensitive) are refused.
    std::vector<std::string> refusal_triggers;
    std::map<std::string, std::vector<std::string>> synonyms;
    std::vector<std::string> relevance_keywords;
    std::vector<std::string> customer_lines;
};

SimulatedCustomerConfig default_simulated_customer();
SimulatedCustomerConfig parse_simulated_customer(const Json& j);

// Deterministic offline stand-in for a chat model, used in simnet runs.
class SimulatedCustomerModel final : public ChatModel {
public:
    explicit SimulatedCustomerModel(SimulatedCustomerConfig config) : config_(std::move(config)) {}
    ChatCompletion complete(const ChatRequest& request) override;

private:
    SimulatedCustomerConfig config_;
};

struct HttpChatConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string model;
    std::string api_key;
    double temperature = 0.7;
    int timeout_seconds = 60;
};

// Generic OpenAI-style chat-completion client over plain HTTP.
class HttpChatModel final : public ChatModel {
public:
    explicit HttpChatModel(HttpChatConfig config) : config_(std::move(config)) {}
    ChatCompletion complete(const ChatRequest& request) override;

    static Json request_body(const HttpChatConfig& config, const ChatRequest& request);
    static ChatCompletion parse_response(const Json& body);

private:
    HttpChatConfig config_;
};

std::string ascii_lower(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);

} // namespace honeywire
