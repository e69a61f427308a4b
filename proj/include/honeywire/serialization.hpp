#pragma once

// JSON mapping for the domain types. Field names follow the type definitions (snake_case);
// enums are written by name.

#include "honeywire/domain.hpp"

#include <json.hpp>

namespace honeywire {

using Json = nlohmann::json;

void to_json(Json& j, const ChannelHandle& v);
void from_json(const Json& j, ChannelHandle& v);
void to_json(Json& j, const MediaRef& v);
void from_json(const Json& j, MediaRef& v);
void to_json(Json& j, const ChatMessage& v);
void from_json(const Json& j, ChatMessage& v);
void to_json(Json& j, const DiscoverySource& v);
void from_json(const Json& j, DiscoverySource& v);
void to_json(Json& j, const RelevanceVerdict& v);
void from_json(const Json& j, RelevanceVerdict& v);
void to_json(Json& j, const ChannelRecord& v);
void from_json(const Json& j, ChannelRecord& v);
void to_json(Json& j, const ActorProfile& v);
void from_json(const Json& j, ActorProfile& v);
void to_json(Json& j, const PaymentDisclosure& v);
void from_json(const Json& j, PaymentDisclosure& v);
void to_json(Json& j, const EngagementOutcome& v);
void from_json(const Json& j, EngagementOutcome& v);
void to_json(Json& j, const Conversation& v);
void from_json(const Json& j, Conversation& v);
void to_json(Json& j, const PriceQuote& v);
void from_json(const Json& j, PriceQuote& v);

// Enums serialize by name.
template <typename Enum>
Json enum_json(Enum v) {
    return std::string(to_string(v));
}

template <typename Enum>
Enum enum_value(const Json& j) {
    return enum_from_string<Enum>(j.get<std::string>());
}

// One line of the canonical line-delimited form.
std::string to_line(const Conversation& c);
Conversation conversation_from_line(const std::string& line);

} // namespace honeywire
