#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/serialization.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace honeywire {

struct DirectoryQuery {
    std::string keyword;
    int max_results = 50;
};

struct OutboundMessage {
    std::string conversation_id;
    std::string message_id;
    std::string text;
};

struct DeliveryReceipt {
    std::string conversation_id;
    std::string message_id;
    Timestamp sent_at = 0;
};

struct InboundEvent {
    std::string conversation_id;  // direct conversations
    std::string channel;          // channel posts (unused by the simnet)
    ChatMessage message;
    Timestamp received_at = 0;
    std::int64_t sequence = 0;
    // media_id -> payload. Payloads cross the adapter boundary but are never persisted.
    std::map<std::string, std::string> media_payloads;
};

struct ChannelHistory {
    std::string title;
    std::vector<ChatMessage> messages;  // newest first
    std::vector<ChatMessage> pinned;
};

// Messaging backend. Implementations serialize their commands internally.
class Transport {
public:
    virtual ~Transport() = default;

    virtual std::string name() const = 0;
    virtual bool simulated() const = 0;
    virtual Timestamp now() const = 0;

    virtual std::vector<ChannelHandle> query_directory(const DirectoryQuery& query) = 0;
    virtual void join_channel(const ChannelHandle& handle) = 0;
    virtual ChannelHistory fetch_history(const ChannelHandle& handle, int limit) = 0;

    // False when the account does not accept direct messages.
    virtual bool can_message(const std::string& actor_id) = 0;
    virtual DeliveryReceipt send_message(const std::string& actor_id, const OutboundMessage& message) = 0;
    virtual std::vector<InboundEvent> poll_events(Timestamp since) = 0;

    // Simulation control; live backends throw NotSimulated.
    virtual std::size_t advance_time(double seconds);
    virtual std::optional<Timestamp> next_event_time() const { return std::nullopt; }
};

// ---- simulated network ----

enum class PersonaKind { FastIndividual, SlowPlatform, BotGreeter, Ghost, Disengager, Upseller };
std::string_view to_string(PersonaKind kind);
template <> PersonaKind enum_from_string<PersonaKind>(std::string_view);

struct LatencySpec {
    double low_seconds = 60.0;
    double high_seconds = 60.0;  // equal to low for fixed latency

    bool fixed() const { return low_seconds == high_seconds; }
};

struct ScriptedMedia {
    MediaKind kind = MediaKind::Image;
    std::vector<std::string> person_labels;
    std::string payload;
};

struct ScriptedMessage {
    std::string text;
    std::vector<ScriptedMedia> media;
    double offset_seconds = 0.0;  // after the step's sampled latency
};

// Replies sent in response to one outbound message.
struct ReplyStep {
    std::vector<ScriptedMessage> messages;
};

struct PersonaScript {
    PersonaKind kind = PersonaKind::FastIndividual;
    LatencySpec latency;
    std::vector<ReplyStep> script;
    std::optional<int> disengage_after;
    bool blocks_sender = false;
};

struct SimChannel {
    ChannelHandle handle;
    std::string title;
    bool join_rejected = false;
    std::vector<ChatMessage> messages;  // oldest first
    std::vector<ChatMessage> pinned;
};

struct SimActor {
    std::string actor_id;
    bool dm_open = true;
    std::optional<PersonaScript> persona;
};

struct Scenario {
    std::uint64_t seed = 1;
    Timestamp start_time = 1'700'000'000'000;
    std::map<std::string, std::vector<std::string>> directory;  // lowercase keyword -> canonical handles
    std::map<std::string, SimChannel> channels;                  // canonical handle -> channel
    std::map<std::string, SimActor> actors;
};

std::map<PersonaKind, LatencySpec> default_latencies();

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const Json& j);
PersonaScript parse_persona(const Json& j, const std::map<PersonaKind, LatencySpec>& defaults);

class SimNet final : public Transport {
public:
    explicit SimNet(Scenario scenario);

    std::string name() const override { return "simnet"; }
    bool simulated() const override { return true; }
    Timestamp now() const override;

    std::vector<ChannelHandle> query_directory(const DirectoryQuery& query) override;
    void join_channel(const ChannelHandle& handle) override;
    ChannelHistory fetch_history(const ChannelHandle& handle, int limit) override;

    bool can_message(const std::string& actor_id) override;
    DeliveryReceipt send_message(const std::string& actor_id, const OutboundMessage& message) override;
    std::vector<InboundEvent> poll_events(Timestamp since) override;

    std::size_t advance_time(double seconds) override;
    std::optional<Timestamp> next_event_time() const override;

    // Moves the clock to `t` (never backwards), firing due timers.
    std::size_t advance_to(Timestamp t);
    std::size_t pending_timers() const;
    const Scenario& scenario() const { return scenario_; }

    // Latency the persona would use for its reply to the n-th outbound (1-based).
    double sample_latency(const std::string& actor_id, int outbound_index) const;

private:
    struct Timer {
        Timestamp due = 0;
        std::string conversation_id;
        std::int64_t sequence = 0;
        InboundEvent event;

        bool operator>(const Timer& other) const {
            if (due != other.due) return due > other.due;
            if (conversation_id != other.conversation_id) return conversation_id > other.conversation_id;
            return sequence > other.sequence;
        }
    };

    std::size_t advance_locked(Timestamp target);

    Scenario scenario_;
    Timestamp now_;
    std::set<std::string> joined_;
    std::map<std::string, int> outbound_count_;        // conversation -> sends
    std::map<std::string, int> media_count_;           // conversation -> media minted
    std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
    std::vector<InboundEvent> delivered_;
    std::int64_t next_sequence_ = 1;
    mutable std::mutex mutex_;
};

// Placeholder for a real messaging backend. It ships without credentials and rejects every call.
class LiveTransport final : public Transport {
public:
    explicit LiveTransport(bool enabled) : enabled_(enabled) {}

    std::string name() const override { return "live"; }
    bool simulated() const override { return false; }
    Timestamp now() const override;

    std::vector<ChannelHandle> query_directory(const DirectoryQuery&) override;
    void join_channel(const ChannelHandle&) override;
    ChannelHistory fetch_history(const ChannelHandle&, int) override;
    bool can_message(const std::string&) override;
    DeliveryReceipt send_message(const std::string&, const OutboundMessage&) override;
    std::vector<InboundEvent> poll_events(Timestamp) override;

private:
    [[noreturn]] void unavailable() const;
    bool enabled_;
};

// Stable short digest for media payloads ("crc32:xxxxxxxx").
std::string content_digest(std::string_view payload);

} // namespace honeywire
