#include "honeywire/llm.hpp"

#include "honeywire/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

namespace honeywire {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    return ascii_lower(haystack).find(ascii_lower(needle)) != std::string::npos;
}

std::string ChatRequest::flattened() const {
    std::string out = system;
    for (const auto& t : turns) {
        out += "\n";
        out += t.content;
    }
    return out;
}

std::vector<std::string> default_refusal_phrases() {
    return {"i'm sorry, but i can't", "i can't assist", "i cannot assist", "i can't help with", "i cannot help with",
            "i'm unable to", "i won't be able to", "as an ai", "抱歉，我不能", "无法协助"};
}

bool is_refusal(const ChatCompletion& completion, const std::vector<std::string>& phrases) {
    if (completion.refused) return true;
    return std::any_of(phrases.begin(), phrases.end(),
                       [&](const std::string& p) { return contains_ci(completion.text, p); });
}

// ---- scripted ----

ScriptedChatModel::ScriptedChatModel(std::vector<Step> steps, Step fallback)
    : steps_(steps.begin(), steps.end()), fallback_(std::move(fallback)) {}

void ScriptedChatModel::push(Step step) {
    std::lock_guard lock(mutex_);
    steps_.push_back(std::move(step));
}

ChatCompletion ScriptedChatModel::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    Step step = fallback_;
    if (!steps_.empty()) {
        step = steps_.front();
        steps_.pop_front();
    }
    switch (step.action) {
    case Action::Reply: return {step.text, false};
    case Action::Refuse: return {step.text, true};
    case Action::Unavailable: throw Error(ErrorCode::LlmUnavailable, "scripted outage");
    case Action::Echo: return {request.turns.empty() ? request.system : request.turns.back().content, false};
    }
    return {};
}

std::vector<ChatRequest> ScriptedChatModel::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

// ---- simulated customer ----

SimulatedCustomerConfig default_simulated_customer() {
    SimulatedCustomerConfig c;
    c.refusal_triggers = {"nude", "裸聊", "naked"};
    c.relevance_keywords = {"video chat", "private chat", "pay to chat", "视频", "一对一", "price", "价格", "service"};
    c.customer_lines = {"nice, what do you offer exactly?", "how much for 30 minutes?",
                        "ok sounds good, how do I pay?", "can you send me your payment details?",
                        "ok, where should I send it?"};
    return c;
}

SimulatedCustomerConfig parse_simulated_customer(const Json& j) {
    auto c = default_simulated_customer();
    if (j.contains("refusal_triggers")) c.refusal_triggers = j.at("refusal_triggers").get<std::vector<std::string>>();
    if (j.contains("synonyms")) c.synonyms = j.at("synonyms").get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("relevance_keywords"))
        c.relevance_keywords = j.at("relevance_keywords").get<std::vector<std::string>>();
    if (j.contains("customer_lines")) c.customer_lines = j.at("customer_lines").get<std::vector<std::string>>();
    return c;
}

ChatCompletion SimulatedCustomerModel::complete(const ChatRequest& request) {
    const auto all = request.flattened();
    for (const auto& trigger : config_.refusal_triggers)
        if (contains_ci(all, trigger)) return {"I'm sorry, but I can't help with that request.", true};

    const std::string last_user = request.turns.empty() ? std::string{} : request.turns.back().content;
    switch (request.task) {
    case ChatTask::Synonyms: {
        std::string out;
        for (const auto& [seed, alternatives] : config_.synonyms) {
            if (!contains_ci(last_user, seed)) continue;
            for (const auto& alt : alternatives) out += alt + "\n";
            break;
        }
        return {out, false};
    }
    case ChatTask::Relevance: {
        for (const auto& k : config_.relevance_keywords)
            if (contains_ci(last_user, k)) return {"yes - the channel advertises paid chat services (\"" + k + "\")", false};
        return {"no - nothing in the digest offers chat-for-hire services", false};
    }
    case ChatTask::Engagement:
    case ChatTask::Generic: {
        const auto replies = std::count_if(request.turns.begin(), request.turns.end(),
                                           [](const ChatTurn& t) { return t.role == "assistant"; });
        if (config_.customer_lines.empty()) return {"ok", false};
        const auto idx = std::min(static_cast<std::size_t>(replies), config_.customer_lines.size() - 1);
        return {config_.customer_lines[idx], false};
    }
    }
    return {};
}

// ---- HTTP ----

Json HttpChatModel::request_body(const HttpChatConfig& config, const ChatRequest& request) {
    Json messages = Json::array();
    if (!request.system.empty()) messages.push_back(Json{{"role", "system"}, {"content", request.system}});
    for (const auto& t : request.turns) messages.push_back(Json{{"role", t.role}, {"content", t.content}});
    return Json{{"model", config.model}, {"messages", messages}, {"temperature", config.temperature}};
}

ChatCompletion HttpChatModel::parse_response(const Json& body) {
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) throw Error(ErrorCode::LlmUnavailable, "response without choices");
    const auto& choice = choices.at(0);
    const auto& message = choice.at("message");
    ChatCompletion c;
    if (message.contains("content") && message.at("content").is_string()) c.text = message.at("content").get<std::string>();
    if (message.contains("refusal") && message.at("refusal").is_string()) {
        c.refused = true;
        if (c.text.empty()) c.text = message.at("refusal").get<std::string>();
    }
    if (choice.value("finish_reason", std::string{}) == "content_filter") c.refused = true;
    return c;
}

ChatCompletion HttpChatModel::complete(const ChatRequest& request) {
    // Split "http://host:port/path" into the client base and request path.
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::LlmUnavailable, "malformed endpoint " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    const auto base = config_.endpoint.substr(0, path_start);
    const auto path = path_start == std::string::npos ? std::string("/") : config_.endpoint.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto result = client.Post(path, headers, request_body(config_, request).dump(), "application/json");
    if (!result) throw Error(ErrorCode::LlmUnavailable, "request failed: " + httplib::to_string(result.error()));
    if (result->status != 200)
        throw Error(ErrorCode::LlmUnavailable, "HTTP " + std::to_string(result->status) + " from " + base);
    try {
        return parse_response(Json::parse(result->body));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::LlmUnavailable, std::string("unparseable completion: ") + e.what());
    }
}

} // namespace honeywire
