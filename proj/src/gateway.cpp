#include "honeywire/gateway.hpp"

#include "honeywire/error.hpp"

#include <httplib.h>

#include <algorithm>

namespace honeywire {

Json pending_draft_json(const PendingDraft& d) {
    return Json{{"draft_id", d.draft_id},
                {"conversation_id", d.conversation_id},
                {"text", d.text},
                {"context_excerpt", d.context_excerpt},
                {"created_at", d.created_at},
                {"purpose", std::string(to_string(d.purpose))},
                {"tier", d.tier}};
}

Json event_json(const EventRecord& e) {
    return Json{{"seq", e.sequence}, {"kind", std::string(to_string(e.kind))}, {"at", e.at}, {"payload", e.payload}};
}

int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::UnknownDraft:
    case ErrorCode::UnknownConversation:
    case ErrorCode::UnknownEscalation:
    case ErrorCode::UnknownChannel: return 404;
    case ErrorCode::StaleDraft:
    case ErrorCode::AlreadyResolved:
    case ErrorCode::NotPendingApproval:
    case ErrorCode::SessionTerminated:
    case ErrorCode::DuplicateSession: return 409;
    case ErrorCode::ValidationFailure:
    case ErrorCode::InvalidVerdict:
    case ErrorCode::UnapprovedSend: return 400;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::LlmUnavailable: return 503;
    default: return 500;
    }
}

Gateway::Gateway(Store& store, EngagementEngine& engine, GatewayConfig config)
    : store_(store), engine_(engine), escalations_(store), config_(std::move(config)) {
    if (config_.token.empty()) throw Error(ErrorCode::ConfigInvalid, "the gateway needs a bearer token");
}

void Gateway::authorize(std::string_view token) const {
    // Compare without an early exit so response time does not leak the matching prefix.
    const auto& expected = config_.token;
    unsigned diff = token.size() == expected.size() ? 0u : 1u;
    for (std::size_t i = 0; i < expected.size(); ++i)
        diff |= static_cast<unsigned>(expected[i] ^ (i < token.size() ? token[i] : 0));
    if (diff != 0) throw Error(ErrorCode::Unauthorized, "missing or wrong bearer token");
}

std::vector<PendingDraft> Gateway::list_pending() const {
    std::vector<std::pair<std::int64_t, PendingDraft>> rows;
    store_.read([&](const State& s) {
        for (const auto& [cid, book] : s.sessions) {
            if (!book.pending_draft_id) continue;
            const auto& record = s.drafts.at(*book.pending_draft_id);
            if (!record.awaiting_decision()) continue;
            rows.emplace_back(record.draft.created_at, record.draft);
        }
    });
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second.draft_id < b.second.draft_id;
    });
    std::vector<PendingDraft> out;
    for (auto& [at, d] : rows) out.push_back(std::move(d));
    return out;
}

Json Gateway::submit_decision(std::string_view token, const std::string& draft_id, DecisionKind decision,
                              const std::string& operator_id, const std::string& text) {
    authorize(token);
    if (operator_id.empty()) throw Error(ErrorCode::ValidationFailure, "operator_id is required");
    std::string conversation_id;
    store_.read([&](const State& s) {
        auto it = s.drafts.find(draft_id);
        if (it == s.drafts.end()) throw Error(ErrorCode::UnknownDraft, "unknown draft " + draft_id);
        if (!it->second.awaiting_decision()) throw Error(ErrorCode::StaleDraft, "draft " + draft_id + " was already decided");
        conversation_id = it->second.draft.conversation_id;
    });
    const auto before = store_.last_sequence();
    const auto c = engine_.apply_operator_decision(conversation_id, draft_id, decision, operator_id, text);
    return Json{{"draft_id", draft_id},
                {"conversation_id", conversation_id},
                {"decision", std::string(to_string(decision))},
                {"first_sequence", before + 1},
                {"last_sequence", store_.last_sequence()},
                {"state", std::string(to_string(c.state))}};
}

Json Gateway::terminate_conversation(std::string_view token, const std::string& conversation_id,
                                     const std::string& operator_id) {
    authorize(token);
    if (operator_id.empty()) throw Error(ErrorCode::ValidationFailure, "operator_id is required");
    std::optional<std::string> pending;
    store_.read([&](const State& s) {
        auto it = s.sessions.find(conversation_id);
        if (it == s.sessions.end()) throw Error(ErrorCode::UnknownConversation, "unknown conversation " + conversation_id);
        pending = it->second.pending_draft_id;
    });
    const auto c = engine_.apply_operator_decision(conversation_id, pending.value_or(""), DecisionKind::Terminate, operator_id);
    return Json{{"conversation_id", conversation_id}, {"state", std::string(to_string(c.state))}, {"outcome", std::string(to_string(c.outcome->kind))}};
}

Json Gateway::get_transcript(const std::string& conversation_id) const {
    Json out;
    store_.read([&](const State& s) {
        auto it = s.conversations.find(conversation_id);
        if (it == s.conversations.end())
            throw Error(ErrorCode::UnknownConversation, "unknown conversation " + conversation_id);
        const auto& c = it->second;
        const auto& book = s.sessions.at(conversation_id);
        out = Json{{"conversation_id", c.conversation_id},
                   {"actor", c.actor},
                   {"state", std::string(to_string(c.state))},
                   {"round_counter", c.round_counter},
                   {"retry_counter", c.retry_counter},
                   {"messages", c.messages},
                   {"disclosures", book.disclosures},
                   {"outcome", nullptr},
                   {"pending_draft", nullptr}};
        if (c.outcome) out["outcome"] = *c.outcome;
        if (book.pending_draft_id) out["pending_draft"] = pending_draft_json(s.drafts.at(*book.pending_draft_id).draft);
    });
    return out;
}

Json Gateway::list_escalations(bool unresolved_only) const {
    Json out = Json::array();
    for (const auto& item : escalations_.list(unresolved_only)) {
        Json j{{"escalation_id", item.escalation_id},
               {"handle", item.handle},
               {"model_verdict", item.model_verdict},
               {"queued_at", item.queued_at},
               {"resolved", nullptr}};
        if (item.resolved) j["resolved"] = *item.resolved;
        out.push_back(std::move(j));
    }
    return out;
}

Json Gateway::resolve_escalation(std::string_view token, const std::string& escalation_id, Decision decision,
                                 const std::string& rationale) {
    authorize(token);
    const auto record = escalations_.apply_human_verdict(escalation_id, decision, rationale, engine_.transport().now());
    return Json{{"escalation_id", escalation_id}, {"channel", record.handle.canonical}, {"verdict", *record.verdict}};
}

std::vector<EventRecord> Gateway::stream_events(std::int64_t since, std::chrono::milliseconds wait) const {
    if (since < 0) since = 0;
    auto events = store_.events_since(since);
    if (events.empty() && store_.wait_for_events(since, wait)) events = store_.events_since(since);
    return events;
}

// ---- HTTP ----

namespace {

std::string bearer(const httplib::Request& req) {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.size() > prefix.size() && header.compare(0, prefix.size(), prefix) == 0) return header.substr(prefix.size());
    return {};
}

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_json(res, http_status_for(e.code()), Json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    } catch (const Json::exception& e) {
        send_json(res, 400, Json{{"error", "ValidationFailure"}, {"message", e.what()}});
    } catch (const std::logic_error& e) {
        // std::stoll on a malformed cursor.
        send_json(res, 400, Json{{"error", "ValidationFailure"}, {"message", e.what()}});
    }
}

} // namespace

HttpGateway::HttpGateway(Gateway& gateway) : gateway_(gateway), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

HttpGateway::~HttpGateway() { stop(); }

void HttpGateway::install_routes() {
    auto& srv = *server_;

    srv.Get("/queue", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            Json out = Json::array();
            for (const auto& d : gateway_.list_pending()) out.push_back(pending_draft_json(d));
            send_json(res, 200, out);
        });
    });

    srv.Post("/decisions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            const auto body = Json::parse(req.body);
            const auto decision = enum_from_string<DecisionKind>(body.at("decision").get<std::string>());
            send_json(res, 200,
                      gateway_.submit_decision(bearer(req), body.at("draft_id").get<std::string>(), decision,
                                               body.value("operator_id", std::string{}), body.value("text", std::string{})));
        });
    });

    srv.Get(R"(/conversations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            send_json(res, 200, gateway_.get_transcript(req.matches[1]));
        });
    });

    srv.Post(R"(/conversations/([^/]+)/terminate)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            const auto body = req.body.empty() ? Json::object() : Json::parse(req.body);
            send_json(res, 200,
                      gateway_.terminate_conversation(bearer(req), req.matches[1], body.value("operator_id", std::string{})));
        });
    });

    srv.Get("/escalations", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            const bool all = req.get_param_value("all") == "true";
            send_json(res, 200, gateway_.list_escalations(!all));
        });
    });

    srv.Post(R"(/escalations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            const auto body = Json::parse(req.body);
            const auto decision = enum_from_string<Decision>(body.at("decision").get<std::string>());
            send_json(res, 200,
                      gateway_.resolve_escalation(bearer(req), req.matches[1], decision, body.value("rationale", std::string{})));
        });
    });

    srv.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            gateway_.authorize(bearer(req));
            std::int64_t since = 0;
            if (req.has_header("Last-Event-ID")) since = std::stoll(req.get_header_value("Last-Event-ID"));
            if (req.has_param("since")) since = std::stoll(req.get_param_value("since"));
            auto cursor = std::make_shared<std::int64_t>(since);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
                while (!stopping_) {
                    const auto events = gateway_.stream_events(*cursor, std::chrono::milliseconds(250));
                    for (const auto& e : events) {
                        const auto frame = "id: " + std::to_string(e.sequence) + "\nevent: " + std::string(to_string(e.kind)) +
                                           "\ndata: " + event_json(e).dump() + "\n\n";
                        if (!sink.is_writable() || !sink.write(frame.data(), frame.size())) return false;
                        *cursor = e.sequence;
                    }
                    if (!events.empty()) return true;
                    if (!sink.is_writable()) return false;
                }
                sink.done();
                return true;
            });
        });
    });
}

bool HttpGateway::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpGateway::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpGateway::listen_after_bind() { return server_->listen_after_bind(); }

void HttpGateway::stop() {
    stopping_ = true;
    if (server_) server_->stop();
}

bool HttpGateway::running() const { return server_->is_running(); }

void HttpGateway::wait_until_ready() const { server_->wait_until_ready(); }

} // namespace honeywire
