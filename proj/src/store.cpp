#include "honeywire/store.hpp"

#include "honeywire/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fcntl.h>
#include <sys/file.h>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace honeywire {

namespace {

constexpr std::size_t kContextExcerptMessages = 10;

constexpr std::array<std::pair<EventKind, std::string_view>, 13> kEventKinds{{
    {EventKind::ChannelDiscovered, "ChannelDiscovered"},
    {EventKind::ChannelJudged, "ChannelJudged"},
    {EventKind::EscalationQueued, "EscalationQueued"},
    {EventKind::EscalationResolved, "EscalationResolved"},
    {EventKind::ActorIdentified, "ActorIdentified"},
    {EventKind::SessionOpened, "SessionOpened"},
    {EventKind::DraftCreated, "DraftCreated"},
    {EventKind::OperatorDecision, "OperatorDecision"},
    {EventKind::MessageSent, "MessageSent"},
    {EventKind::MessageReceived, "MessageReceived"},
    {EventKind::OcrAttached, "OcrAttached"},
    {EventKind::DisclosureFound, "DisclosureFound"},
    {EventKind::SessionTerminated, "SessionTerminated"},
}};

constexpr std::array<std::pair<DecisionKind, std::string_view>, 4> kDecisionKinds{{
    {DecisionKind::Approve, "Approve"},
    {DecisionKind::Edit, "Edit"},
    {DecisionKind::Reject, "Reject"},
    {DecisionKind::Terminate, "Terminate"},
}};

[[noreturn]] void reject(const std::string& why) { throw Error(ErrorCode::ValidationFailure, why); }

void require(bool condition, const std::string& why) {
    if (!condition) reject(why);
}

std::string crc_hex(const std::string& body) {
    auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

Conversation& live_conversation(State& s, const std::string& id) {
    auto it = s.conversations.find(id);
    require(it != s.conversations.end(), "unknown conversation " + id);
    require(it->second.state != SessionState::Terminated, "conversation " + id + " is terminated");
    return it->second;
}

void transition(Conversation& c, SessionState to) {
    if (c.state == to) return;
    require(is_legal_transition(c.state, to), "illegal transition " + std::string(to_string(c.state)) + " -> " +
                                                  std::string(to_string(to)) + " in " + c.conversation_id);
    c.state = to;
}

std::vector<ChatMessage> excerpt(const Conversation& c) {
    const auto n = std::min(kContextExcerptMessages, c.messages.size());
    return {c.messages.end() - static_cast<std::ptrdiff_t>(n), c.messages.end()};
}

void check_message_append(const Conversation& c, const ChatMessage& m, Direction expected) {
    require(m.direction == expected, "message direction mismatch");
    require(!m.message_id.empty(), "message without id");
    require(!(m.text.empty() && m.media.empty()), "message with neither text nor media");
    require(!m.ocr_text || !m.media.empty(), "ocr text without media");
    if (!c.messages.empty()) require(m.timestamp > c.messages.back().timestamp, "ordering violated");
    require(m.round_index == next_round_index(c, expected), "round index mismatch");
    for (const auto& existing : c.messages) {
        require(existing.message_id != m.message_id, "duplicate message id " + m.message_id);
        for (const auto& a : existing.media)
            for (const auto& b : m.media) require(a.media_id != b.media_id, "duplicate media id " + b.media_id);
    }
}

Classification classify_labels(std::size_t distinct) {
    if (distinct >= 2) return Classification::Platform;
    if (distinct == 1) return Classification::Individual;
    return Classification::Unknown;
}

void refresh_classification(State& s, const std::string& actor_id) {
    auto it = s.actors.find(actor_id);
    if (it == s.actors.end()) return;
    std::set<std::string> labels;
    for (const auto& [id, c] : s.conversations) {
        if (c.actor != actor_id) continue;
        for (const auto& m : c.messages) {
            if (m.direction != Direction::Inbound) continue;
            for (const auto& media : m.media) labels.insert(media.person_labels.begin(), media.person_labels.end());
        }
    }
    it->second.classification = classify_labels(labels.size());
}

void apply_channel_discovered(State& s, const Json& p) {
    auto record = p.at("channel").get<ChannelRecord>();
    require(!s.channels.contains(record.handle.canonical), "channel already discovered: " + record.handle.canonical);
    const bool root = record.source.kind != SourceKind::CrossLink;
    require(record.depth >= 0 && (record.depth == 0) == root, "depth/source mismatch for " + record.handle.canonical);
    s.channels.emplace(record.handle.canonical, std::move(record));
}

void apply_channel_judged(State& s, const Json& p) {
    const auto handle = p.at("handle").get<std::string>();
    auto verdict = p.at("verdict").get<RelevanceVerdict>();
    auto it = s.channels.find(handle);
    require(it != s.channels.end(), "unknown channel " + handle);
    if (verdict.judged_by == Judge::Model)
        require(!it->second.verdict || it->second.verdict->judged_by != Judge::Human,
                "model verdict cannot supersede a human verdict on " + handle);
    it->second.verdict = std::move(verdict);
}

void apply_escalation_queued(State& s, const Json& p, Timestamp) {
    EscalationItem item;
    item.escalation_id = p.at("escalation_id").get<std::string>();
    item.handle = p.at("handle").get<ChannelHandle>();
    item.model_verdict = p.at("model_verdict").get<RelevanceVerdict>();
    item.queued_at = p.at("queued_at").get<Timestamp>();
    require(item.model_verdict.decision == Decision::Borderline || item.model_verdict.decision == Decision::Refusal,
            "only Borderline or Refusal verdicts are escalated");
    require(s.channels.contains(item.handle.canonical), "unknown channel " + item.handle.canonical);
    require(!s.escalations.contains(item.escalation_id), "duplicate escalation " + item.escalation_id);
    s.escalations.emplace(item.escalation_id, std::move(item));
}

void apply_escalation_resolved(State& s, const Json& p) {
    const auto id = p.at("escalation_id").get<std::string>();
    auto verdict = p.at("verdict").get<RelevanceVerdict>();
    auto it = s.escalations.find(id);
    require(it != s.escalations.end(), "unknown escalation " + id);
    require(!it->second.resolved, "escalation already resolved " + id);
    require(verdict.judged_by == Judge::Human, "escalations resolve with human verdicts only");
    require(verdict.decision == Decision::Relevant || verdict.decision == Decision::Irrelevant,
            "human verdict must be Relevant or Irrelevant");
    s.channels.at(it->second.handle.canonical).verdict = verdict;
    it->second.resolved = std::move(verdict);
}

void apply_actor_identified(State& s, const Json& p) {
    auto actor = p.at("actor").get<ActorProfile>();
    require(!actor.actor_id.empty(), "actor without id");
    require(!s.actors.contains(actor.actor_id), "duplicate actor " + actor.actor_id);
    s.actors.emplace(actor.actor_id, std::move(actor));
}

void apply_session_opened(State& s, const Json& p) {
    const auto id = p.at("conversation_id").get<std::string>();
    const auto actor = p.at("actor").get<std::string>();
    require(s.actors.contains(actor), "unknown actor " + actor);
    require(!s.conversations.contains(id), "duplicate conversation " + id);
    require(!s.active_session_by_actor.contains(actor), "actor already has an active session: " + actor);
    Conversation c;
    c.conversation_id = id;
    c.actor = actor;
    s.conversations.emplace(id, std::move(c));
    SessionBook book;
    book.retry_budget = p.value("max_retries", 3);
    require(book.retry_budget >= 1 && book.retry_budget <= 3, "max_retries must be within 1..3");
    s.sessions.emplace(id, std::move(book));
    s.active_session_by_actor.emplace(actor, id);
}

void apply_draft_created(State& s, const Json& p, Timestamp at) {
    const auto cid = p.at("conversation_id").get<std::string>();
    auto& c = live_conversation(s, cid);
    auto& book = s.sessions.at(cid);

    DraftRecord record;
    record.draft.draft_id = p.at("draft_id").get<std::string>();
    record.draft.conversation_id = cid;
    record.draft.text = p.value("text", std::string{});
    record.draft.purpose = enum_value<DraftPurpose>(p.at("purpose"));
    record.draft.tier = p.value("tier", 0);
    record.draft.created_at = at;
    record.draft.context_excerpt = excerpt(c);
    record.refused = p.value("refused", false);
    require(!s.drafts.contains(record.draft.draft_id), "duplicate draft " + record.draft.draft_id);
    require(!book.pending_draft_id, "conversation " + cid + " already has a pending draft");

    if (record.draft.purpose == DraftPurpose::Opener) {
        require(!record.refused, "openers are not model-drafted");
        require(c.state == SessionState::Idle || c.state == SessionState::ContactSent, "opener outside contact phase");
        require(!record.draft.text.empty(), "empty opener");
        transition(c, SessionState::ContactSent);
        book.pending_draft_id = record.draft.draft_id;
    } else {
        require(c.state == SessionState::AwaitingReply || c.state == SessionState::Drafting,
                "reply drafted in state " + std::string(to_string(c.state)));
        transition(c, SessionState::Drafting);
        if (record.refused) {
            require(c.retry_counter < book.retry_budget, "retry budget exhausted");
            ++c.retry_counter;
        } else {
            require(!record.draft.text.empty(), "empty draft");
            c.retry_counter = 0;
            transition(c, SessionState::PendingApproval);
            book.pending_draft_id = record.draft.draft_id;
        }
    }
    s.drafts.emplace(record.draft.draft_id, std::move(record));
}

void apply_operator_decision(State& s, const Json& p, std::int64_t sequence) {
    const auto cid = p.at("conversation_id").get<std::string>();
    const auto draft_id = p.value("draft_id", std::string{});
    const auto decision = enum_value<DecisionKind>(p.at("decision"));
    const auto operator_id = p.at("operator_id").get<std::string>();
    require(!operator_id.empty(), "decision without operator");
    auto& c = live_conversation(s, cid);
    auto& book = s.sessions.at(cid);

    if (draft_id.empty()) {
        require(decision == DecisionKind::Terminate, "only Terminate may omit a draft");
    } else {
        auto it = s.drafts.find(draft_id);
        require(it != s.drafts.end(), "unknown draft " + draft_id);
        auto& record = it->second;
        require(record.draft.conversation_id == cid, "draft belongs to another conversation");
        require(record.awaiting_decision(), "draft already decided: " + draft_id);
        record.decision = decision;
        record.operator_id = operator_id;
        if (decision == DecisionKind::Approve) record.final_text = record.draft.text;
        if (decision == DecisionKind::Edit) {
            record.final_text = p.at("text").get<std::string>();
            require(!record.final_text.empty(), "edit with empty text");
        }
        if (decision == DecisionKind::Reject || decision == DecisionKind::Terminate) {
            book.pending_draft_id.reset();
            if (decision == DecisionKind::Reject) {
                ++book.regenerations;
                if (record.draft.purpose == DraftPurpose::Reply) transition(c, SessionState::Drafting);
            }
        }
    }
    s.decisions.push_back(DecisionRecord{sequence, draft_id, cid, decision, operator_id});
}

void apply_message_sent(State& s, const Json& p) {
    const auto cid = p.at("conversation_id").get<std::string>();
    const auto draft_id = p.at("draft_id").get<std::string>();
    auto message = p.at("message").get<ChatMessage>();
    auto& c = live_conversation(s, cid);
    auto& book = s.sessions.at(cid);

    auto it = s.drafts.find(draft_id);
    require(it != s.drafts.end(), "send references unknown draft " + draft_id);
    auto& record = it->second;
    require(record.draft.conversation_id == cid, "draft belongs to another conversation");
    require(record.decision == DecisionKind::Approve || record.decision == DecisionKind::Edit,
            "send without an Approve/Edit decision for draft " + draft_id);
    require(!record.sent, "draft already sent: " + draft_id);
    require(message.text == record.final_text, "sent text differs from the approved text");
    require(message.media.empty(), "outbound media is not supported");
    check_message_append(c, message, Direction::Outbound);

    if (record.draft.purpose == DraftPurpose::Reply) transition(c, SessionState::AwaitingReply);
    record.sent = true;
    book.pending_draft_id.reset();
    book.regenerations = 0;
    book.last_outbound_at = message.timestamp;
    c.messages.push_back(std::move(message));
}

void apply_message_received(State& s, const Json& p) {
    const auto cid = p.at("conversation_id").get<std::string>();
    auto message = p.at("message").get<ChatMessage>();
    auto& c = live_conversation(s, cid);
    auto& book = s.sessions.at(cid);
    require(!message.ocr_text, "OCR text is attached by a separate event");
    check_message_append(c, message, Direction::Inbound);

    const bool first_inbound = !book.last_inbound_at.has_value();
    std::optional<Timestamp> first_outbound;
    for (const auto& m : c.messages)
        if (m.direction == Direction::Outbound) {
            first_outbound = m.timestamp;
            break;
        }

    if (c.state == SessionState::ContactSent && first_outbound) transition(c, SessionState::AwaitingReply);
    book.last_inbound_at = message.timestamp;
    const bool has_media = !message.media.empty();
    const auto ts = message.timestamp;
    c.messages.push_back(std::move(message));
    c.round_counter = count_rounds(c.messages);

    auto actor = s.actors.find(c.actor);
    if (actor != s.actors.end() && first_inbound && first_outbound)
        actor->second.first_response_latencies.push_back(static_cast<double>(ts - *first_outbound) / 1000.0);
    if (has_media) refresh_classification(s, c.actor);
}

void apply_ocr_attached(State& s, const Json& p) {
    const auto cid = p.at("conversation_id").get<std::string>();
    const auto message_id = p.at("message_id").get<std::string>();
    const auto media_id = p.at("media_id").get<std::string>();
    const auto text = p.at("text").get<std::string>();
    auto& c = live_conversation(s, cid);
    auto msg = std::find_if(c.messages.begin(), c.messages.end(),
                            [&](const ChatMessage& m) { return m.message_id == message_id; });
    require(msg != c.messages.end(), "OCR for unknown message " + message_id);
    auto media = std::find_if(msg->media.begin(), msg->media.end(),
                              [&](const MediaRef& m) { return m.media_id == media_id; });
    require(media != msg->media.end(), "OCR for unknown media " + media_id);
    require(media->kind == MediaKind::Image, "OCR on non-image media " + media_id);
    if (msg->ocr_text && !msg->ocr_text->empty())
        *msg->ocr_text += "\n" + text;
    else
        msg->ocr_text = text;
}

void apply_disclosure_found(State& s, const Json& p) {
    const auto cid = p.at("conversation_id").get<std::string>();
    auto disclosure = p.at("disclosure").get<PaymentDisclosure>();
    auto& c = live_conversation(s, cid);
    require(carrier_consistent(disclosure.method, disclosure.carrier), "carrier inconsistent with method");
    auto msg = std::find_if(c.messages.begin(), c.messages.end(),
                            [&](const ChatMessage& m) { return m.message_id == disclosure.message_id; });
    require(msg != c.messages.end(), "disclosure cites unknown message " + disclosure.message_id);
    require(msg->direction == Direction::Inbound, "disclosure cites an outbound message");
    auto& book = s.sessions.at(cid);
    for (const auto& d : book.disclosures)
        require(!(d.method == disclosure.method && d.detail == disclosure.detail), "duplicate disclosure");
    book.disclosures.push_back(std::move(disclosure));
}

void apply_session_terminated(State& s, const Json& p) {
    const auto cid = p.at("conversation_id").get<std::string>();
    const auto kind = enum_value<OutcomeKind>(p.at("outcome"));
    auto& c = live_conversation(s, cid);
    auto& book = s.sessions.at(cid);
    const bool paid = kind == OutcomeKind::PaymentObtained;
    require(paid != book.disclosures.empty(), "PaymentObtained iff disclosures were found");
    if (kind == OutcomeKind::LlmFailure)
        require(c.retry_counter == book.retry_budget, "LlmFailure requires a full run of consecutive refusals");
    transition(c, SessionState::Terminated);
    c.outcome = EngagementOutcome{kind, paid ? book.disclosures : std::vector<PaymentDisclosure>{}};
    book.pending_draft_id.reset();
    s.active_session_by_actor.erase(c.actor);
}

} // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kEventKinds)
        if (k == kind) return name;
    return "?";
}

template <> EventKind enum_from_string<EventKind>(std::string_view name) {
    for (const auto& [k, n] : kEventKinds)
        if (n == name) return k;
    throw Error(ErrorCode::ValidationFailure, "unknown event kind '" + std::string(name) + "'");
}

std::string_view to_string(DecisionKind kind) {
    for (const auto& [k, name] : kDecisionKinds)
        if (k == kind) return name;
    return "?";
}

template <> DecisionKind enum_from_string<DecisionKind>(std::string_view name) {
    for (const auto& [k, n] : kDecisionKinds)
        if (n == name) return k;
    throw Error(ErrorCode::ValidationFailure, "unknown decision '" + std::string(name) + "'");
}

std::string_view to_string(DraftPurpose purpose) { return purpose == DraftPurpose::Opener ? "Opener" : "Reply"; }

template <> DraftPurpose enum_from_string<DraftPurpose>(std::string_view name) {
    if (name == "Opener") return DraftPurpose::Opener;
    if (name == "Reply") return DraftPurpose::Reply;
    throw Error(ErrorCode::ValidationFailure, "unknown draft purpose '" + std::string(name) + "'");
}

int next_round_index(const Conversation& c, Direction direction) {
    const int completed = count_rounds(c.messages);
    if (direction == Direction::Outbound) return completed + 1;
    // An inbound joins the round opened by the latest outbound.
    bool outbound_open = !c.messages.empty() && c.messages.back().direction == Direction::Outbound;
    if (outbound_open) return completed + 1;
    return completed;
}

State applied(const State& state, const EventRecord& e) {
    if (e.sequence != state.last_sequence + 1)
        throw Error(ErrorCode::ValidationFailure, "sequence " + std::to_string(e.sequence) + " does not follow " +
                                                      std::to_string(state.last_sequence));
    // Handlers validate before mutating; a copy keeps multi-step handlers atomic as well.
    State next = state;
    try {
        const auto& p = e.payload;
        switch (e.kind) {
        case EventKind::ChannelDiscovered: apply_channel_discovered(next, p); break;
        case EventKind::ChannelJudged: apply_channel_judged(next, p); break;
        case EventKind::EscalationQueued: apply_escalation_queued(next, p, e.at); break;
        case EventKind::EscalationResolved: apply_escalation_resolved(next, p); break;
        case EventKind::ActorIdentified: apply_actor_identified(next, p); break;
        case EventKind::SessionOpened: apply_session_opened(next, p); break;
        case EventKind::DraftCreated: apply_draft_created(next, p, e.at); break;
        case EventKind::OperatorDecision: apply_operator_decision(next, p, e.sequence); break;
        case EventKind::MessageSent: apply_message_sent(next, p); break;
        case EventKind::MessageReceived: apply_message_received(next, p); break;
        case EventKind::OcrAttached: apply_ocr_attached(next, p); break;
        case EventKind::DisclosureFound: apply_disclosure_found(next, p); break;
        case EventKind::SessionTerminated: apply_session_terminated(next, p); break;
        }
    } catch (const Json::exception& ex) {
        reject(std::string("malformed ") + std::string(to_string(e.kind)) + " payload: " + ex.what());
    }
    next.last_sequence = e.sequence;
    return next;
}

void apply_event(State& state, const EventRecord& e) { state = applied(state, e); }

std::string encode_event_line(const EventRecord& e) {
    Json body{{"seq", e.sequence}, {"kind", std::string(to_string(e.kind))}, {"at", e.at}, {"payload", e.payload}};
    std::string text = body.dump();
    const auto crc = crc_hex(text);
    text.pop_back();
    text += ",\"crc\":\"" + crc + "\"}";
    return text;
}

EventRecord decode_event_line(const std::string& line, std::int64_t expected_sequence) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::exception& ex) {
        throw CorruptLogError(expected_sequence, std::string("unparseable line: ") + ex.what());
    }
    if (!j.is_object() || !j.contains("crc") || !j.contains("seq"))
        throw CorruptLogError(expected_sequence, "record missing crc or seq");
    const auto crc = j["crc"].get<std::string>();
    j.erase("crc");
    if (crc_hex(j.dump()) != crc) throw CorruptLogError(expected_sequence, "checksum mismatch");
    EventRecord e;
    e.sequence = j.at("seq").get<std::int64_t>();
    if (e.sequence != expected_sequence)
        throw CorruptLogError(expected_sequence, "found sequence " + std::to_string(e.sequence));
    try {
        e.kind = enum_from_string<EventKind>(j.at("kind").get<std::string>());
    } catch (const Error& ex) {
        throw CorruptLogError(expected_sequence, ex.what());
    }
    e.at = j.at("at").get<Timestamp>();
    e.payload = std::move(j.at("payload"));
    return e;
}

std::vector<EventRecord> read_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<EventRecord> events;
    std::size_t pos = 0;
    std::int64_t expected = 1;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) throw CorruptLogError(expected, "torn final record");
        events.push_back(decode_event_line(content.substr(pos, nl - pos), expected));
        ++expected;
        pos = nl + 1;
    }
    return events;
}

State replay(const std::vector<EventRecord>& events) {
    State state;
    for (const auto& e : events) {
        if (e.sequence != state.last_sequence + 1)
            throw CorruptLogError(state.last_sequence + 1, "sequence gap (found " + std::to_string(e.sequence) + ")");
        try {
            apply_event(state, e);
        } catch (const Error& ex) {
            throw CorruptLogError(e.sequence, ex.what());
        }
    }
    return state;
}

State replay(const std::filesystem::path& path) { return replay(read_log(path)); }

bool json_contains(const Json& haystack, const Json& subset) {
    if (subset.is_object()) {
        if (!haystack.is_object()) return false;
        for (const auto& [key, value] : subset.items()) {
            auto it = haystack.find(key);
            if (it == haystack.end() || !json_contains(*it, value)) return false;
        }
        return true;
    }
    if (subset.is_array() && haystack.is_array()) {
        // Every element of the subset must match some element of the haystack.
        for (const auto& want : subset) {
            bool found = std::any_of(haystack.begin(), haystack.end(),
                                     [&](const Json& have) { return json_contains(have, want); });
            if (!found) return false;
        }
        return true;
    }
    return haystack == subset;
}

Store::Store() = default;

Store::Store(std::filesystem::path log_path, bool sync_writes) : log_path_(std::move(log_path)), sync_writes_(sync_writes) {
    const auto& path = *log_path_;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());

    // One writer per log: a second process appending would reuse sequence numbers.
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for append");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw Error(ErrorCode::IoFailure, path.string() + " is in use by another process");
    }
    try {
        restore();
    } catch (...) {
        ::close(fd_);
        fd_ = -1;
        throw;
    }
}

void Store::restore() {
    const auto& path = *log_path_;
    if (std::filesystem::file_size(path) > 0) {
        // Drop a torn trailing record left by an interrupted append.
        std::ifstream in(path, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const auto last_nl = content.rfind('\n');
        const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
        if (keep != content.size()) std::filesystem::resize_file(path, keep);
        events_ = read_log(path);

        // Newest snapshot at or below the log tail, if any.
        std::optional<std::pair<std::int64_t, std::filesystem::path>> best;
        const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("snapshot.", 0) != 0) continue;
            try {
                const auto seq = std::stoll(name.substr(9));
                if (seq <= static_cast<std::int64_t>(events_.size()) && (!best || seq > best->first))
                    best = std::make_pair(seq, entry.path());
            } catch (const std::exception&) {
            }
        }
        if (best) {
            std::ifstream snap(best->second);
            state_ = Json::parse(snap).get<State>();
        }
        for (const auto& e : events_) {
            if (e.sequence <= state_.last_sequence) continue;
            try {
                apply_event(state_, e);
            } catch (const Error& ex) {
                throw CorruptLogError(e.sequence, ex.what());
            }
        }
    }
}

Store::~Store() {
    if (fd_ >= 0) ::close(fd_);
}

std::int64_t Store::append(EventKind kind, Json payload, Timestamp at) {
    std::int64_t sequence = 0;
    {
        std::unique_lock lock(mutex_);
        EventRecord e{state_.last_sequence + 1, kind, std::move(payload), at};
        State next = applied(state_, e);
        if (fd_ >= 0) {
            const auto line = encode_event_line(e) + "\n";
            std::size_t written = 0;
            while (written < line.size()) {
                const auto n = ::write(fd_, line.data() + written, line.size() - written);
                if (n < 0) throw Error(ErrorCode::IoFailure, "append failed");
                written += static_cast<std::size_t>(n);
            }
            if (sync_writes_ && ::fdatasync(fd_) != 0) throw Error(ErrorCode::IoFailure, "fdatasync failed");
        }
        state_ = std::move(next);
        sequence = e.sequence;
        events_.push_back(std::move(e));
    }
    {
        std::lock_guard wait_lock(wait_mutex_);
    }
    appended_.notify_all();
    return sequence;
}

State Store::snapshot() const {
    std::shared_lock lock(mutex_);
    return state_;
}

void Store::read(const std::function<void(const State&)>& reader) const {
    std::shared_lock lock(mutex_);
    reader(state_);
}

std::int64_t Store::last_sequence() const {
    std::shared_lock lock(mutex_);
    return state_.last_sequence;
}

std::vector<EventRecord> Store::events_since(std::int64_t sequence) const {
    std::shared_lock lock(mutex_);
    if (sequence < 0) sequence = 0;
    if (static_cast<std::size_t>(sequence) >= events_.size()) return {};
    return {events_.begin() + sequence, events_.end()};
}

bool Store::wait_for_events(std::int64_t sequence, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(wait_mutex_);
    return appended_.wait_for(lock, timeout, [&] { return last_sequence() > sequence; });
}

std::vector<Json> Store::snapshot_query(SnapshotKind kind, const Json& filter) const {
    std::shared_lock lock(mutex_);
    std::vector<Json> out;
    auto consider = [&](Json record) {
        if (filter.is_null() || json_contains(record, filter)) out.push_back(std::move(record));
    };
    switch (kind) {
    case SnapshotKind::Channels:
        for (const auto& [k, v] : state_.channels) consider(Json(v));
        break;
    case SnapshotKind::Escalations:
        for (const auto& [k, v] : Json(state_).at("escalations").items()) consider(v);
        break;
    case SnapshotKind::Actors:
        for (const auto& [k, v] : state_.actors) consider(Json(v));
        break;
    case SnapshotKind::Conversations:
        for (const auto& [k, v] : state_.conversations) consider(Json(v));
        break;
    case SnapshotKind::Disclosures:
        for (const auto& [k, v] : state_.conversations) {
            if (!v.outcome) continue;
            for (const auto& d : v.outcome->evidence) {
                Json record = d;
                record["conversation_id"] = k;
                consider(std::move(record));
            }
        }
        break;
    case SnapshotKind::Drafts:
        for (const auto& [k, v] : Json(state_).at("drafts").items()) consider(v);
        break;
    }
    return out;
}

std::optional<std::filesystem::path> Store::write_snapshot() const {
    if (!log_path_) return std::nullopt;
    std::shared_lock lock(mutex_);
    const auto dir = log_path_->has_parent_path() ? log_path_->parent_path() : std::filesystem::path(".");
    const auto target = dir / ("snapshot." + std::to_string(state_.last_sequence));
    const auto tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp);
        out << Json(state_).dump() << '\n';
    }
    std::filesystem::rename(tmp, target);
    return target;
}

// ---- State JSON ----

namespace {

Json draft_json(const DraftRecord& r) {
    Json j{{"draft_id", r.draft.draft_id},
           {"conversation_id", r.draft.conversation_id},
           {"text", r.draft.text},
           {"context_excerpt", r.draft.context_excerpt},
           {"created_at", r.draft.created_at},
           {"purpose", std::string(to_string(r.draft.purpose))},
           {"tier", r.draft.tier},
           {"refused", r.refused},
           {"decision", nullptr},
           {"operator_id", r.operator_id},
           {"final_text", r.final_text},
           {"sent", r.sent}};
    if (r.decision) j["decision"] = std::string(to_string(*r.decision));
    return j;
}

DraftRecord draft_from_json(const Json& j) {
    DraftRecord r;
    r.draft.draft_id = j.at("draft_id").get<std::string>();
    r.draft.conversation_id = j.at("conversation_id").get<std::string>();
    r.draft.text = j.at("text").get<std::string>();
    r.draft.context_excerpt = j.at("context_excerpt").get<std::vector<ChatMessage>>();
    r.draft.created_at = j.at("created_at").get<Timestamp>();
    r.draft.purpose = enum_value<DraftPurpose>(j.at("purpose"));
    r.draft.tier = j.at("tier").get<int>();
    r.refused = j.at("refused").get<bool>();
    if (!j.at("decision").is_null()) r.decision = enum_value<DecisionKind>(j.at("decision"));
    r.operator_id = j.at("operator_id").get<std::string>();
    r.final_text = j.at("final_text").get<std::string>();
    r.sent = j.at("sent").get<bool>();
    return r;
}

Json optional_json(const std::optional<Timestamp>& t) { return t ? Json(*t) : Json(nullptr); }

std::optional<Timestamp> optional_timestamp(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<Timestamp>();
}

} // namespace

void to_json(Json& j, const State& s) {
    j = Json::object();
    j["last_sequence"] = s.last_sequence;
    j["channels"] = Json::object();
    for (const auto& [k, v] : s.channels) j["channels"][k] = v;
    j["escalations"] = Json::object();
    for (const auto& [k, v] : s.escalations) {
        Json e{{"escalation_id", v.escalation_id},
               {"handle", v.handle},
               {"model_verdict", v.model_verdict},
               {"queued_at", v.queued_at},
               {"resolved", nullptr}};
        if (v.resolved) e["resolved"] = *v.resolved;
        j["escalations"][k] = std::move(e);
    }
    j["actors"] = Json::object();
    for (const auto& [k, v] : s.actors) j["actors"][k] = v;
    j["conversations"] = Json::object();
    for (const auto& [k, v] : s.conversations) j["conversations"][k] = v;
    j["sessions"] = Json::object();
    for (const auto& [k, v] : s.sessions) {
        j["sessions"][k] = Json{{"pending_draft_id", v.pending_draft_id ? Json(*v.pending_draft_id) : Json(nullptr)},
                                {"regenerations", v.regenerations},
                                {"retry_budget", v.retry_budget},
                                {"last_outbound_at", optional_json(v.last_outbound_at)},
                                {"last_inbound_at", optional_json(v.last_inbound_at)},
                                {"disclosures", v.disclosures}};
    }
    j["drafts"] = Json::object();
    for (const auto& [k, v] : s.drafts) j["drafts"][k] = draft_json(v);
    j["active_session_by_actor"] = s.active_session_by_actor;
    j["decisions"] = Json::array();
    for (const auto& d : s.decisions)
        j["decisions"].push_back(Json{{"sequence", d.sequence},
                                      {"draft_id", d.draft_id},
                                      {"conversation_id", d.conversation_id},
                                      {"decision", std::string(to_string(d.decision))},
                                      {"operator_id", d.operator_id}});
}

void from_json(const Json& j, State& s) {
    s = State{};
    s.last_sequence = j.at("last_sequence").get<std::int64_t>();
    for (const auto& [k, v] : j.at("channels").items()) s.channels.emplace(k, v.get<ChannelRecord>());
    for (const auto& [k, v] : j.at("escalations").items()) {
        EscalationItem e;
        e.escalation_id = v.at("escalation_id").get<std::string>();
        e.handle = v.at("handle").get<ChannelHandle>();
        e.model_verdict = v.at("model_verdict").get<RelevanceVerdict>();
        e.queued_at = v.at("queued_at").get<Timestamp>();
        if (!v.at("resolved").is_null()) e.resolved = v.at("resolved").get<RelevanceVerdict>();
        s.escalations.emplace(k, std::move(e));
    }
    for (const auto& [k, v] : j.at("actors").items()) s.actors.emplace(k, v.get<ActorProfile>());
    for (const auto& [k, v] : j.at("conversations").items()) s.conversations.emplace(k, v.get<Conversation>());
    for (const auto& [k, v] : j.at("sessions").items()) {
        SessionBook b;
        if (!v.at("pending_draft_id").is_null()) b.pending_draft_id = v.at("pending_draft_id").get<std::string>();
        b.regenerations = v.at("regenerations").get<int>();
        b.retry_budget = v.value("retry_budget", 3);
        b.last_outbound_at = optional_timestamp(v.at("last_outbound_at"));
        b.last_inbound_at = optional_timestamp(v.at("last_inbound_at"));
        b.disclosures = v.at("disclosures").get<std::vector<PaymentDisclosure>>();
        s.sessions.emplace(k, std::move(b));
    }
    for (const auto& [k, v] : j.at("drafts").items()) s.drafts.emplace(k, draft_from_json(v));
    s.active_session_by_actor = j.at("active_session_by_actor").get<std::map<std::string, std::string>>();
    for (const auto& d : j.at("decisions"))
        s.decisions.push_back(DecisionRecord{d.at("sequence").get<std::int64_t>(), d.at("draft_id").get<std::string>(),
                                             d.at("conversation_id").get<std::string>(),
                                             enum_value<DecisionKind>(d.at("decision")),
                                             d.at("operator_id").get<std::string>()});
}

} // namespace honeywire
