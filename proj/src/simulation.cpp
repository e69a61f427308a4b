#include "honeywire/simulation.hpp"

#include "honeywire/error.hpp"

#include <algorithm>

namespace honeywire {

SimulationDriver::SimulationDriver(EngagementEngine& engine, SimNet& net, DriverOptions options)
    : engine_(engine), net_(net), options_(options), started_at_(net.now()) {
    if (&engine.transport() != &net)
        throw Error(ErrorCode::ConfigInvalid, "the driver and the engine must share one simulated network");
}

std::vector<std::string> SimulationDriver::open_sessions(const std::vector<std::string>& actor_ids) {
    std::vector<std::string> opened;
    for (const auto& actor : actor_ids) {
        if (!net_.can_message(actor)) continue;
        opened.push_back(engine_.open_session(actor));
    }
    return opened;
}

void SimulationDriver::resume_from_store() {
    const auto events = engine_.store().events();
    std::map<std::string, std::string> actor_of;
    Timestamp latest = net_.now();
    for (const auto& e : events) {
        latest = std::max(latest, e.at);
        if (e.kind == EventKind::SessionOpened) {
            actor_of[e.payload.at("conversation_id").get<std::string>()] = e.payload.at("actor").get<std::string>();
        } else if (e.kind == EventKind::MessageSent) {
            const auto cid = e.payload.at("conversation_id").get<std::string>();
            const auto message = e.payload.at("message").get<ChatMessage>();
            const auto sent_at = e.payload.at("receipt").value("sent_at", message.timestamp);
            net_.advance_to(sent_at);
            net_.send_message(actor_of.at(cid), OutboundMessage{cid, message.message_id, message.text});
        }
    }
    net_.advance_to(latest);

    // Anything the log already holds must not be fed to the engine twice.
    const auto state = engine_.store().snapshot();
    for (const auto& ev : net_.poll_events(0)) {
        auto c = state.conversations.find(ev.conversation_id);
        if (c == state.conversations.end()) continue;
        const bool logged = std::any_of(c->second.messages.begin(), c->second.messages.end(),
                                        [&](const ChatMessage& m) { return m.message_id == ev.message.message_id; });
        if (logged || c->second.state == SessionState::Terminated) seen_.insert(ev.sequence);
    }
    for (const auto& [cid, c] : state.conversations) {
        if (c.state == SessionState::Drafting) reply_at_[cid] = net_.now();
        if (c.state == SessionState::AwaitingReply && !c.messages.empty() &&
            c.messages.back().direction == Direction::Inbound)
            reply_at_[cid] = std::max(net_.now(), c.messages.back().timestamp + seconds_to_ms(options_.debounce_seconds));
    }
}

void SimulationDriver::ingest() {
    auto events = net_.poll_events(0);
    std::sort(events.begin(), events.end(), [](const InboundEvent& a, const InboundEvent& b) {
        if (a.received_at != b.received_at) return a.received_at < b.received_at;
        return a.sequence < b.sequence;
    });
    for (const auto& ev : events) {
        if (!seen_.insert(ev.sequence).second) continue;
        Conversation c;
        try {
            c = engine_.on_inbound(ev);
        } catch (const Error& e) {
            // Late replies after a session ended are dropped.
            if (e.code() == ErrorCode::SessionTerminated || e.code() == ErrorCode::UnknownConversation) continue;
            throw;
        }
        if (c.state == SessionState::AwaitingReply || c.state == SessionState::Drafting)
            reply_at_[ev.conversation_id] = ev.received_at + seconds_to_ms(options_.debounce_seconds);
    }
}

void SimulationDriver::reply_due() {
    const auto now = net_.now();
    std::vector<std::string> due;
    for (const auto& [cid, at] : reply_at_)
        if (at <= now) due.push_back(cid);
    for (const auto& cid : due) {
        reply_at_.erase(cid);
        const auto c = engine_.conversation(cid);
        if (c.state != SessionState::AwaitingReply && c.state != SessionState::Drafting) continue;
        try {
            engine_.respond(cid);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LlmUnavailable) throw;
            reply_at_[cid] = now + seconds_to_ms(options_.debounce_seconds);
        }
    }
}

bool SimulationDriver::drafts_awaiting_decision() const {
    bool any = false;
    engine_.store().read([&](const State& s) {
        for (const auto& [cid, book] : s.sessions)
            if (book.pending_draft_id) any = true;
    });
    return any;
}

std::optional<Timestamp> SimulationDriver::next_wakeup() const {
    std::optional<Timestamp> next = net_.next_event_time();
    auto consider = [&](Timestamp t) {
        if (!next || t < *next) next = t;
    };
    for (const auto& [cid, at] : reply_at_) consider(at);
    std::vector<std::string> active;
    engine_.store().read([&](const State& s) {
        for (const auto& [actor, cid] : s.active_session_by_actor) active.push_back(cid);
    });
    for (const auto& cid : active)
        if (auto deadline = engine_.timeout_deadline(cid)) consider(*deadline);
    return next;
}

bool SimulationDriver::step() {
    ++steps_;
    ingest();
    reply_due();
    engine_.check_timeouts(net_.now());

    if (!options_.advance_while_pending && drafts_awaiting_decision()) return false;
    auto next = next_wakeup();
    if (!next) return false;
    if (*next > started_at_ + seconds_to_ms(options_.horizon_seconds)) return false;
    net_.advance_to(std::max(*next, net_.now()));
    return true;
}

void SimulationDriver::run() {
    while (step()) {
    }
}

} // namespace honeywire
