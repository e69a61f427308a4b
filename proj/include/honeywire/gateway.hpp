#pragma once

#include "honeywire/engagement.hpp"
#include "honeywire/error.hpp"
#include "honeywire/filter.hpp"
#include "honeywire/store.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace honeywire {

inline constexpr std::string_view kGatewayTokenEnv = "HONEYWIRE_GATEWAY_TOKEN";

struct GatewayConfig {
    std::string token;  // shared bearer token; must be non-empty
    std::string bind_address = "127.0.0.1";
    int port = 8787;
};

Json pending_draft_json(const PendingDraft& draft);
Json event_json(const EventRecord& event);

// Operator-facing API. Every mutation goes through the engine or the escalation queue, which
// write to the store before acting.
class Gateway {
public:
    Gateway(Store& store, EngagementEngine& engine, GatewayConfig config);

    // Throws Unauthorized unless `token` matches the configured one.
    void authorize(std::string_view token) const;

    // Drafts awaiting a decision, oldest first.
    std::vector<PendingDraft> list_pending() const;

    // Throws UnknownDraft, StaleDraft or Unauthorized.
    Json submit_decision(std::string_view token, const std::string& draft_id, DecisionKind decision,
                         const std::string& operator_id, const std::string& text = {});

    // Ends a conversation regardless of its draft state.
    Json terminate_conversation(std::string_view token, const std::string& conversation_id,
                                const std::string& operator_id);

    // Throws UnknownConversation.
    Json get_transcript(const std::string& conversation_id) const;

    Json list_escalations(bool unresolved_only) const;
    Json resolve_escalation(std::string_view token, const std::string& escalation_id, Decision decision,
                            const std::string& rationale);

    // Events after `since`, waiting up to `wait` for the first one.
    std::vector<EventRecord> stream_events(std::int64_t since, std::chrono::milliseconds wait) const;

    Store& store() { return store_; }

private:
    Store& store_;
    EngagementEngine& engine_;
    EscalationQueue escalations_;
    GatewayConfig config_;
};

// HTTP front end: GET /queue, POST /decisions, GET /conversations/{id},
// POST /conversations/{id}/terminate, GET /escalations, POST /escalations/{id}, GET /events?since=.
class HttpGateway {
public:
    explicit HttpGateway(Gateway& gateway);
    ~HttpGateway();

    // Binds and serves until stop(). Returns false if binding failed.
    bool listen(const std::string& host, int port);
    // Binds to an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool running() const;
    void wait_until_ready() const;

private:
    void install_routes();

    Gateway& gateway_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<bool> stopping_{false};
};

int http_status_for(ErrorCode code);

} // namespace honeywire
