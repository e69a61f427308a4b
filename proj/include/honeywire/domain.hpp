#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace honeywire {

// Epoch milliseconds, UTC.
using Timestamp = std::int64_t;

constexpr Timestamp seconds_to_ms(double seconds) { return static_cast<Timestamp>(seconds * 1000.0); }

struct ChannelHandle {
    std::string raw;
    std::string canonical;

    bool operator==(const ChannelHandle& other) const { return canonical == other.canonical; }
    auto operator<=>(const ChannelHandle& other) const { return canonical <=> other.canonical; }
};

// Trims, strips a leading "@", lowercases. Throws EmptyHandle on blank input.
ChannelHandle canonicalize_handle(std::string_view raw);

enum class Direction { Inbound, Outbound };
enum class MediaKind { Image, Other };

struct MediaRef {
    std::string media_id;
    MediaKind kind = MediaKind::Image;
    std::vector<std::string> person_labels;
    // Digest of the payload; raw media bytes are never retained.
    std::string content_hash;

    bool operator==(const MediaRef&) const = default;
};

struct ChatMessage {
    std::string message_id;
    Direction direction = Direction::Inbound;
    Timestamp timestamp = 0;
    std::string text;
    std::vector<MediaRef> media;
    std::optional<std::string> ocr_text;
    int round_index = 0;
    // Posting account for channel messages; empty inside conversations.
    std::string sender;

    bool operator==(const ChatMessage&) const = default;
};

enum class SourceKind { DirectoryQuery, CrossLink, SeedConfig };

struct DiscoverySource {
    SourceKind kind = SourceKind::SeedConfig;
    // Keyword for DirectoryQuery, parent canonical handle for CrossLink.
    std::string detail;

    bool operator==(const DiscoverySource&) const = default;
};

enum class Decision { Relevant, Irrelevant, Refusal, Borderline };
enum class Judge { Model, Human };

struct RelevanceVerdict {
    Decision decision = Decision::Borderline;
    std::string rationale;
    Judge judged_by = Judge::Model;

    bool operator==(const RelevanceVerdict&) const = default;
};

struct ChannelRecord {
    ChannelHandle handle;
    std::string title;
    DiscoverySource source;
    int depth = 0;
    std::vector<ChatMessage> pinned_posts;
    std::vector<ChatMessage> recent_messages;
    std::optional<RelevanceVerdict> verdict;  // nullopt = Unjudged

    bool operator==(const ChannelRecord&) const = default;
};

enum class Classification { Individual, Platform, Unknown };

struct ActorProfile {
    std::string actor_id;
    std::set<std::string> source_channels;  // canonical handles
    Classification classification = Classification::Unknown;
    std::vector<double> first_response_latencies;  // seconds

    bool operator==(const ActorProfile&) const = default;
};

enum class SessionState { Idle, ContactSent, AwaitingReply, Drafting, PendingApproval, Terminated };

bool is_legal_transition(SessionState from, SessionState to);

enum class PaymentMethod { Alipay, AlipayImage, WeChat, USDT, QQImage, Bank, PaymentSolution };
enum class Carrier { Text, Image };

struct PaymentDisclosure {
    PaymentMethod method = PaymentMethod::Alipay;
    Carrier carrier = Carrier::Text;
    std::string message_id;
    std::optional<std::string> media_id;
    std::string detail;

    bool operator==(const PaymentDisclosure&) const = default;
};

enum class OutcomeKind { PaymentObtained, NoResponse, Disengaged, LlmFailure, OperatorTerminated };

struct EngagementOutcome {
    OutcomeKind kind = OutcomeKind::NoResponse;
    std::vector<PaymentDisclosure> evidence;

    bool operator==(const EngagementOutcome&) const = default;
};

struct Conversation {
    std::string conversation_id;
    std::string actor;
    SessionState state = SessionState::Idle;
    std::vector<ChatMessage> messages;
    int round_counter = 0;
    int retry_counter = 0;
    std::optional<EngagementOutcome> outcome;  // nullopt = Pending

    bool operator==(const Conversation&) const = default;
};

struct PriceQuote {
    int duration_minutes = 0;
    double price_cny = 0.0;
    std::string message_id;

    bool operator==(const PriceQuote&) const = default;
};

// Completed rounds: an outbound followed by at least one inbound before the next outbound.
int count_rounds(const std::vector<ChatMessage>& messages);

// Empty iff every Conversation invariant holds.
std::vector<std::string> validate_conversation(const Conversation& conversation);

// Method/carrier consistency for image-only methods.
bool carrier_consistent(PaymentMethod method, Carrier carrier);

std::string_view to_string(Direction v);
std::string_view to_string(MediaKind v);
std::string_view to_string(SourceKind v);
std::string_view to_string(Decision v);
std::string_view to_string(Judge v);
std::string_view to_string(Classification v);
std::string_view to_string(SessionState v);
std::string_view to_string(PaymentMethod v);
std::string_view to_string(Carrier v);
std::string_view to_string(OutcomeKind v);

// Inverse of to_string; throw ValidationFailure on unknown names.
template <typename Enum>
Enum enum_from_string(std::string_view name);

template <> Direction enum_from_string<Direction>(std::string_view);
template <> MediaKind enum_from_string<MediaKind>(std::string_view);
template <> SourceKind enum_from_string<SourceKind>(std::string_view);
template <> Decision enum_from_string<Decision>(std::string_view);
template <> Judge enum_from_string<Judge>(std::string_view);
template <> Classification enum_from_string<Classification>(std::string_view);
template <> SessionState enum_from_string<SessionState>(std::string_view);
template <> PaymentMethod enum_from_string<PaymentMethod>(std::string_view);
template <> Carrier enum_from_string<Carrier>(std::string_view);
template <> OutcomeKind enum_from_string<OutcomeKind>(std::string_view);

inline constexpr PaymentMethod kAllPaymentMethods[] = {
    PaymentMethod::Alipay, PaymentMethod::AlipayImage, PaymentMethod::WeChat, PaymentMethod::USDT,
    PaymentMethod::QQImage, PaymentMethod::Bank, PaymentMethod::PaymentSolution};

} // namespace honeywire
