#include "honeywire/serialization.hpp"

#include "honeywire/error.hpp"

namespace honeywire {

namespace {

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

} // namespace

void to_json(Json& j, const ChannelHandle& v) { j = Json{{"raw", v.raw}, {"canonical", v.canonical}}; }

void from_json(const Json& j, ChannelHandle& v) {
    v.raw = j.at("raw").get<std::string>();
    v.canonical = j.at("canonical").get<std::string>();
}

void to_json(Json& j, const MediaRef& v) {
    j = Json{{"media_id", v.media_id},
             {"kind", enum_json(v.kind)},
             {"person_labels", v.person_labels},
             {"content_hash", v.content_hash}};
}

void from_json(const Json& j, MediaRef& v) {
    v.media_id = j.at("media_id").get<std::string>();
    v.kind = enum_value<MediaKind>(j.at("kind"));
    v.person_labels = field_or<std::vector<std::string>>(j, "person_labels", {});
    v.content_hash = field_or<std::string>(j, "content_hash", "");
}

void to_json(Json& j, const ChatMessage& v) {
    j = Json{{"message_id", v.message_id},
             {"direction", enum_json(v.direction)},
             {"timestamp", v.timestamp},
             {"text", v.text},
             {"media", v.media},
             {"round_index", v.round_index}};
    if (v.ocr_text) j["ocr_text"] = *v.ocr_text;
    if (!v.sender.empty()) j["sender"] = v.sender;
}

void from_json(const Json& j, ChatMessage& v) {
    v.message_id = j.at("message_id").get<std::string>();
    v.direction = enum_value<Direction>(j.at("direction"));
    v.timestamp = j.at("timestamp").get<Timestamp>();
    v.text = field_or<std::string>(j, "text", "");
    v.media = field_or<std::vector<MediaRef>>(j, "media", {});
    v.ocr_text = optional_field<std::string>(j, "ocr_text");
    v.round_index = field_or<int>(j, "round_index", 0);
    v.sender = field_or<std::string>(j, "sender", "");
}

void to_json(Json& j, const DiscoverySource& v) { j = Json{{"kind", enum_json(v.kind)}, {"detail", v.detail}}; }

void from_json(const Json& j, DiscoverySource& v) {
    v.kind = enum_value<SourceKind>(j.at("kind"));
    v.detail = field_or<std::string>(j, "detail", "");
}

void to_json(Json& j, const RelevanceVerdict& v) {
    j = Json{{"decision", enum_json(v.decision)}, {"rationale", v.rationale}, {"judged_by", enum_json(v.judged_by)}};
}

void from_json(const Json& j, RelevanceVerdict& v) {
    v.decision = enum_value<Decision>(j.at("decision"));
    v.rationale = field_or<std::string>(j, "rationale", "");
    v.judged_by = enum_value<Judge>(j.at("judged_by"));
}

void to_json(Json& j, const ChannelRecord& v) {
    j = Json{{"handle", v.handle},
             {"title", v.title},
             {"discovery_source", v.source},
             {"depth", v.depth},
             {"pinned_posts", v.pinned_posts},
             {"recent_messages", v.recent_messages},
             {"verdict", nullptr}};
    if (v.verdict) j["verdict"] = *v.verdict;
}

void from_json(const Json& j, ChannelRecord& v) {
    v.handle = j.at("handle").get<ChannelHandle>();
    v.title = field_or<std::string>(j, "title", "");
    v.source = j.at("discovery_source").get<DiscoverySource>();
    v.depth = j.at("depth").get<int>();
    v.pinned_posts = field_or<std::vector<ChatMessage>>(j, "pinned_posts", {});
    v.recent_messages = field_or<std::vector<ChatMessage>>(j, "recent_messages", {});
    v.verdict = optional_field<RelevanceVerdict>(j, "verdict");
}

void to_json(Json& j, const ActorProfile& v) {
    j = Json{{"actor_id", v.actor_id},
             {"source_channels", v.source_channels},
             {"classification", enum_json(v.classification)},
             {"first_response_latencies", v.first_response_latencies}};
}

void from_json(const Json& j, ActorProfile& v) {
    v.actor_id = j.at("actor_id").get<std::string>();
    v.source_channels = field_or<std::set<std::string>>(j, "source_channels", {});
    v.classification = enum_value<Classification>(j.at("classification"));
    v.first_response_latencies = field_or<std::vector<double>>(j, "first_response_latencies", {});
}

void to_json(Json& j, const PaymentDisclosure& v) {
    j = Json{{"method", enum_json(v.method)},
             {"carrier", enum_json(v.carrier)},
             {"evidence_ref", Json{{"message_id", v.message_id}}},
             {"detail", v.detail}};
    if (v.media_id) j["evidence_ref"]["media_id"] = *v.media_id;
}

void from_json(const Json& j, PaymentDisclosure& v) {
    v.method = enum_value<PaymentMethod>(j.at("method"));
    v.carrier = enum_value<Carrier>(j.at("carrier"));
    const auto& ref = j.at("evidence_ref");
    v.message_id = ref.at("message_id").get<std::string>();
    v.media_id = optional_field<std::string>(ref, "media_id");
    v.detail = field_or<std::string>(j, "detail", "");
}

void to_json(Json& j, const EngagementOutcome& v) {
    j = Json{{"kind", enum_json(v.kind)}, {"evidence", v.evidence}};
}

void from_json(const Json& j, EngagementOutcome& v) {
    v.kind = enum_value<OutcomeKind>(j.at("kind"));
    v.evidence = field_or<std::vector<PaymentDisclosure>>(j, "evidence", {});
}

void to_json(Json& j, const Conversation& v) {
    j = Json{{"conversation_id", v.conversation_id},
             {"actor", v.actor},
             {"state", enum_json(v.state)},
             {"messages", v.messages},
             {"round_counter", v.round_counter},
             {"retry_counter", v.retry_counter},
             {"outcome", nullptr}};
    if (v.outcome) j["outcome"] = *v.outcome;
}

void from_json(const Json& j, Conversation& v) {
    v.conversation_id = j.at("conversation_id").get<std::string>();
    v.actor = j.at("actor").get<std::string>();
    v.state = enum_value<SessionState>(j.at("state"));
    v.messages = field_or<std::vector<ChatMessage>>(j, "messages", {});
    v.round_counter = j.at("round_counter").get<int>();
    v.retry_counter = j.at("retry_counter").get<int>();
    v.outcome = optional_field<EngagementOutcome>(j, "outcome");
}

void to_json(Json& j, const PriceQuote& v) {
    j = Json{{"duration_minutes", v.duration_minutes},
             {"price_cny", v.price_cny},
             {"evidence_ref", Json{{"message_id", v.message_id}}}};
}

void from_json(const Json& j, PriceQuote& v) {
    v.duration_minutes = j.at("duration_minutes").get<int>();
    v.price_cny = j.at("price_cny").get<double>();
    v.message_id = j.at("evidence_ref").at("message_id").get<std::string>();
}

std::string to_line(const Conversation& c) { return Json(c).dump(); }

Conversation conversation_from_line(const std::string& line) {
    try {
        return Json::parse(line).get<Conversation>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ValidationFailure, e.what());
    }
}

} // namespace honeywire
