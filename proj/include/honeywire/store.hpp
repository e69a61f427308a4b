#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/serialization.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace honeywire {

enum class EventKind {
    ChannelDiscovered,
    ChannelJudged,
    EscalationQueued,
    EscalationResolved,
    ActorIdentified,
    SessionOpened,
    DraftCreated,
    OperatorDecision,
    MessageSent,
    MessageReceived,
    OcrAttached,
    DisclosureFound,
    SessionTerminated,
};

std::string_view to_string(EventKind kind);
template <> EventKind enum_from_string<EventKind>(std::string_view);

struct EventRecord {
    std::int64_t sequence = 0;
    EventKind kind = EventKind::ChannelDiscovered;
    Json payload;
    Timestamp at = 0;

    bool operator==(const EventRecord&) const = default;
};

struct EscalationItem {
    std::string escalation_id;
    ChannelHandle handle;
    RelevanceVerdict model_verdict;
    Timestamp queued_at = 0;
    std::optional<RelevanceVerdict> resolved;

    bool operator==(const EscalationItem&) const = default;
};

enum class DecisionKind { Approve, Edit, Reject, Terminate };
std::string_view to_string(DecisionKind kind);
template <> DecisionKind enum_from_string<DecisionKind>(std::string_view);

enum class DraftPurpose { Opener, Reply };
std::string_view to_string(DraftPurpose purpose);
template <> DraftPurpose enum_from_string<DraftPurpose>(std::string_view);

struct PendingDraft {
    std::string draft_id;
    std::string conversation_id;
    std::string text;
    std::vector<ChatMessage> context_excerpt;
    Timestamp created_at = 0;
    DraftPurpose purpose = DraftPurpose::Reply;
    int tier = 0;

    bool operator==(const PendingDraft&) const = default;
};

// Every drafting attempt, including refused ones, with its review trail.
struct DraftRecord {
    PendingDraft draft;
    bool refused = false;
    std::optional<DecisionKind> decision;
    std::string operator_id;
    std::string final_text;
    bool sent = false;

    bool awaiting_decision() const { return !refused && !decision; }
    bool operator==(const DraftRecord&) const = default;
};

// Per-conversation bookkeeping that is not part of the Conversation record itself.
struct SessionBook {
    std::optional<std::string> pending_draft_id;
    int regenerations = 0;
    int retry_budget = 3;  // consecutive refusals that end the session
    std::optional<Timestamp> last_outbound_at;
    std::optional<Timestamp> last_inbound_at;
    std::vector<PaymentDisclosure> disclosures;

    bool operator==(const SessionBook&) const = default;
};

struct DecisionRecord {
    std::int64_t sequence = 0;
    std::string draft_id;
    std::string conversation_id;
    DecisionKind decision = DecisionKind::Approve;
    std::string operator_id;

    bool operator==(const DecisionRecord&) const = default;
};

// Everything derivable from the log. Live runs and replays build it with the same reducer.
struct State {
    std::map<std::string, ChannelRecord> channels;
    std::map<std::string, EscalationItem> escalations;
    std::map<std::string, ActorProfile> actors;
    std::map<std::string, Conversation> conversations;
    std::map<std::string, SessionBook> sessions;
    std::map<std::string, DraftRecord> drafts;
    std::map<std::string, std::string> active_session_by_actor;
    std::vector<DecisionRecord> decisions;
    std::int64_t last_sequence = 0;

    bool operator==(const State&) const = default;
};

void to_json(Json& j, const State& s);
void from_json(const Json& j, State& s);

// Validates the event against the current state and applies it. Throws ValidationFailure
// without touching the state when the event is not admissible.
void apply_event(State& state, const EventRecord& event);
State applied(const State& state, const EventRecord& event);

// Round index a new message would carry if appended now.
int next_round_index(const Conversation& c, Direction direction);

// Serialized line (without trailing newline) including the checksum field.
std::string encode_event_line(const EventRecord& event);
EventRecord decode_event_line(const std::string& line, std::int64_t expected_sequence);

std::vector<EventRecord> read_log(const std::filesystem::path& path);
State replay(const std::vector<EventRecord>& events);
State replay(const std::filesystem::path& path);

enum class SnapshotKind { Channels, Escalations, Actors, Conversations, Disclosures, Drafts };

class Store {
public:
    // In-memory store; nothing touches disk.
    Store();
    // Opens (or creates) a log file, restores state from the newest snapshot plus log tail.
    explicit Store(std::filesystem::path log_path, bool sync_writes = true);
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    std::int64_t append(EventKind kind, Json payload, Timestamp at);

    State snapshot() const;
    void read(const std::function<void(const State&)>& reader) const;

    std::int64_t last_sequence() const;
    std::vector<EventRecord> events_since(std::int64_t sequence) const;
    std::vector<EventRecord> events() const { return events_since(0); }

    // Blocks until an event with sequence > `sequence` exists or the timeout passes.
    bool wait_for_events(std::int64_t sequence, std::chrono::milliseconds timeout) const;

    // Records in the current snapshot whose JSON contains `filter` as a subset.
    std::vector<Json> snapshot_query(SnapshotKind kind, const Json& filter) const;

    // Writes snapshot.<seq> next to the log; no-op for in-memory stores.
    std::optional<std::filesystem::path> write_snapshot() const;

    const std::optional<std::filesystem::path>& path() const { return log_path_; }

private:
    // Loads the newest snapshot and replays the log tail into state_.
    void restore();

    std::optional<std::filesystem::path> log_path_;
    bool sync_writes_ = true;
    int fd_ = -1;
    State state_;
    std::vector<EventRecord> events_;
    mutable std::shared_mutex mutex_;
    mutable std::mutex wait_mutex_;
    mutable std::condition_variable appended_;
};

bool json_contains(const Json& haystack, const Json& subset);

} // namespace honeywire
