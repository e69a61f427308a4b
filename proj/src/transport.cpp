#include "honeywire/transport.hpp"

#include "honeywire/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>

namespace honeywire {

namespace {

constexpr std::array<std::pair<PersonaKind, std::string_view>, 6> kPersonaKinds{{
    {PersonaKind::FastIndividual, "FastIndividual"},
    {PersonaKind::SlowPlatform, "SlowPlatform"},
    {PersonaKind::BotGreeter, "BotGreeter"},
    {PersonaKind::Ghost, "Ghost"},
    {PersonaKind::Disengager, "Disengager"},
    {PersonaKind::Upseller, "Upseller"},
}};

constexpr double kChannelPostSpacingSeconds = 600.0;
constexpr double kBurstSpacingSeconds = 2.0;

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::uint32_t crc_of(std::string_view s) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

LatencySpec parse_latency(const Json& j) {
    if (j.contains("fixed")) {
        const double v = j.at("fixed").get<double>();
        return {v, v};
    }
    if (j.contains("uniform")) {
        const auto range = j.at("uniform").get<std::vector<double>>();
        if (range.size() != 2 || range[0] > range[1] || range[0] < 0)
            throw Error(ErrorCode::ConfigInvalid, "uniform latency needs [low, high] with 0 <= low <= high");
        return {range[0], range[1]};
    }
    throw Error(ErrorCode::ConfigInvalid, "latency spec must be {fixed} or {uniform}");
}

ScriptedMessage parse_scripted_message(const Json& j) {
    ScriptedMessage m;
    m.text = j.value("text", std::string{});
    m.offset_seconds = j.value("offset", 0.0);
    for (const auto& media : j.value("media", Json::array())) {
        ScriptedMedia sm;
        sm.kind = enum_from_string<MediaKind>(media.value("kind", std::string("Image")));
        sm.person_labels = media.value("person_labels", std::vector<std::string>{});
        sm.payload = media.value("payload", std::string{});
        m.media.push_back(std::move(sm));
    }
    if (m.text.empty() && m.media.empty()) throw Error(ErrorCode::ConfigInvalid, "scripted message with no content");
    return m;
}

ChatMessage channel_message(const Json& j, const std::string& id, Timestamp ts) {
    ChatMessage m;
    m.message_id = id;
    m.direction = Direction::Inbound;
    m.timestamp = ts;
    m.text = j.value("text", std::string{});
    m.sender = j.value("sender", std::string{});
    int n = 0;
    for (const auto& media : j.value("media", Json::array())) {
        MediaRef ref;
        ref.media_id = id + "/m" + std::to_string(++n);
        ref.kind = enum_from_string<MediaKind>(media.value("kind", std::string("Image")));
        ref.person_labels = media.value("person_labels", std::vector<std::string>{});
        ref.content_hash = content_digest(media.value("payload", std::string{}));
        m.media.push_back(std::move(ref));
    }
    return m;
}

} // namespace

std::string content_digest(std::string_view payload) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc_of(payload));
    return std::string("crc32:") + buf;
}

std::string_view to_string(PersonaKind kind) {
    for (const auto& [k, n] : kPersonaKinds)
        if (k == kind) return n;
    return "?";
}

template <> PersonaKind enum_from_string<PersonaKind>(std::string_view name) {
    for (const auto& [k, n] : kPersonaKinds)
        if (n == name) return k;
    throw Error(ErrorCode::ConfigInvalid, "unknown persona kind '" + std::string(name) + "'");
}

std::size_t Transport::advance_time(double) {
    throw Error(ErrorCode::NotSimulated, name() + " backend has no simulated clock");
}

std::map<PersonaKind, LatencySpec> default_latencies() {
    return {
        {PersonaKind::FastIndividual, {60.0, 60.0}},
        {PersonaKind::SlowPlatform, {1800.0, 7200.0}},
        {PersonaKind::BotGreeter, {2.0, 2.0}},
        {PersonaKind::Ghost, {0.0, 0.0}},
        {PersonaKind::Disengager, {300.0, 300.0}},
        {PersonaKind::Upseller, {120.0, 120.0}},
    };
}

PersonaScript parse_persona(const Json& j, const std::map<PersonaKind, LatencySpec>& defaults) {
    PersonaScript p;
    p.kind = enum_from_string<PersonaKind>(j.at("kind").get<std::string>());
    p.latency = j.contains("latency") ? parse_latency(j.at("latency")) : defaults.at(p.kind);
    if (j.contains("disengage_after") && !j.at("disengage_after").is_null())
        p.disengage_after = j.at("disengage_after").get<int>();
    p.blocks_sender = j.value("blocks_sender", false);
    for (const auto& step : j.value("script", Json::array())) {
        ReplyStep rs;
        const Json& messages = step.is_array() ? step : step.at("messages");
        for (const auto& m : messages) rs.messages.push_back(parse_scripted_message(m));
        p.script.push_back(std::move(rs));
    }
    if (p.kind == PersonaKind::Ghost && !p.script.empty())
        throw Error(ErrorCode::ConfigInvalid, "Ghost personas must have an empty script");
    if (p.kind == PersonaKind::Disengager && !p.disengage_after)
        throw Error(ErrorCode::ConfigInvalid, "Disengager personas need disengage_after");
    if (p.disengage_after && *p.disengage_after < 0)
        throw Error(ErrorCode::ConfigInvalid, "disengage_after must be non-negative");
    return p;
}

Scenario parse_scenario(const Json& j) {
    Scenario s;
    s.seed = j.value("seed", std::uint64_t{1});
    s.start_time = j.value("start_time", s.start_time);

    auto latencies = default_latencies();
    const Json latency_defaults = j.value("latency_defaults", Json::object());
    for (const auto& [name, spec] : latency_defaults.items())
        latencies[enum_from_string<PersonaKind>(name)] = parse_latency(spec);

    const Json directory = j.value("directory", Json::object());
    for (const auto& [keyword, handles] : directory.items()) {
        auto& list = s.directory[lowercase(keyword)];
        for (const auto& h : handles) list.push_back(canonicalize_handle(h.get<std::string>()).canonical);
    }

    for (const auto& c : j.value("channels", Json::array())) {
        SimChannel ch;
        ch.handle = canonicalize_handle(c.at("handle").get<std::string>());
        ch.title = c.value("title", ch.handle.canonical);
        ch.join_rejected = c.value("join_rejected", false);

        std::vector<Json> posts;
        if (c.contains("filler")) {
            const auto& f = c.at("filler");
            const int count = f.at("count").get<int>();
            const auto text = f.value("text", std::string("update"));
            const auto sender = f.value("sender", std::string{});
            for (int i = 1; i <= count; ++i)
                posts.push_back(Json{{"text", text + " " + std::to_string(i)}, {"sender", sender}});
        }
        for (const auto& m : c.value("messages", Json::array())) posts.push_back(m);

        const auto n = static_cast<Timestamp>(posts.size());
        for (Timestamp i = 0; i < n; ++i) {
            const Timestamp ts = s.start_time - seconds_to_ms(kChannelPostSpacingSeconds) * (n - i);
            ch.messages.push_back(channel_message(posts[static_cast<std::size_t>(i)],
                                                  ch.handle.canonical + "#" + std::to_string(i + 1), ts));
        }
        int pin = 0;
        for (const auto& m : c.value("pinned", Json::array())) {
            ++pin;
            const Timestamp ts = s.start_time - seconds_to_ms(kChannelPostSpacingSeconds) * (n + pin);
            ch.pinned.push_back(channel_message(m, ch.handle.canonical + "#pin" + std::to_string(pin), ts));
        }
        const auto key = ch.handle.canonical;
        if (!s.channels.emplace(key, std::move(ch)).second)
            throw Error(ErrorCode::ConfigInvalid, "duplicate channel " + key);
    }

    for (const auto& a : j.value("actors", Json::array())) {
        SimActor actor;
        actor.actor_id = a.at("actor_id").get<std::string>();
        actor.dm_open = a.value("dm_open", true);
        if (a.contains("persona") && !a.at("persona").is_null()) actor.persona = parse_persona(a.at("persona"), latencies);
        const auto key = actor.actor_id;
        if (!s.actors.emplace(key, std::move(actor)).second)
            throw Error(ErrorCode::ConfigInvalid, "duplicate actor " + key);
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read scenario " + path.string());
    try {
        return parse_scenario(Json::parse(in));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
    }
}

// ---- SimNet ----

SimNet::SimNet(Scenario scenario) : scenario_(std::move(scenario)), now_(scenario_.start_time) {}

Timestamp SimNet::now() const {
    std::lock_guard lock(mutex_);
    return now_;
}

std::vector<ChannelHandle> SimNet::query_directory(const DirectoryQuery& query) {
    if (query.keyword.empty()) throw Error(ErrorCode::ValidationFailure, "directory query needs a keyword");
    if (query.max_results <= 0) throw Error(ErrorCode::ValidationFailure, "max_results must be positive");
    std::lock_guard lock(mutex_);
    auto it = scenario_.directory.find(lowercase(query.keyword));
    if (it == scenario_.directory.end()) return {};
    std::vector<std::string> canon = it->second;
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
    if (canon.size() > static_cast<std::size_t>(query.max_results)) canon.resize(static_cast<std::size_t>(query.max_results));
    std::vector<ChannelHandle> out;
    for (const auto& c : canon) {
        auto ch = scenario_.channels.find(c);
        out.push_back(ch != scenario_.channels.end() ? ch->second.handle : canonicalize_handle(c));
    }
    return out;
}

void SimNet::join_channel(const ChannelHandle& handle) {
    std::lock_guard lock(mutex_);
    auto it = scenario_.channels.find(handle.canonical);
    if (it == scenario_.channels.end()) throw Error(ErrorCode::UnknownChannel, handle.canonical);
    if (it->second.join_rejected) throw Error(ErrorCode::JoinRejected, handle.canonical);
    joined_.insert(handle.canonical);
}

ChannelHistory SimNet::fetch_history(const ChannelHandle& handle, int limit) {
    if (limit <= 0) throw Error(ErrorCode::ValidationFailure, "history limit must be positive");
    std::lock_guard lock(mutex_);
    if (!joined_.contains(handle.canonical)) throw Error(ErrorCode::NotJoined, handle.canonical);
    const auto& ch = scenario_.channels.at(handle.canonical);
    ChannelHistory h;
    h.title = ch.title;
    h.pinned = ch.pinned;
    const auto take = std::min(ch.messages.size(), static_cast<std::size_t>(limit));
    h.messages.assign(ch.messages.rbegin(), ch.messages.rbegin() + static_cast<std::ptrdiff_t>(take));
    return h;
}

bool SimNet::can_message(const std::string& actor_id) {
    std::lock_guard lock(mutex_);
    auto it = scenario_.actors.find(actor_id);
    return it != scenario_.actors.end() && it->second.dm_open && it->second.persona.has_value();
}

double SimNet::sample_latency(const std::string& actor_id, int outbound_index) const {
    const auto& persona = *scenario_.actors.at(actor_id).persona;
    if (persona.latency.fixed()) return persona.latency.low_seconds;
    // Seeded per (actor, round) so latencies do not depend on the order sessions run in.
    std::seed_seq seq{static_cast<std::uint32_t>(scenario_.seed), static_cast<std::uint32_t>(scenario_.seed >> 32),
                      crc_of(actor_id), static_cast<std::uint32_t>(outbound_index)};
    std::mt19937_64 rng(seq);
    const auto lo = static_cast<std::uint64_t>(persona.latency.low_seconds);
    const auto hi = static_cast<std::uint64_t>(persona.latency.high_seconds);
    return static_cast<double>(lo + rng() % (hi - lo + 1));
}

DeliveryReceipt SimNet::send_message(const std::string& actor_id, const OutboundMessage& message) {
    std::lock_guard lock(mutex_);
    auto it = scenario_.actors.find(actor_id);
    if (it == scenario_.actors.end() || !it->second.persona || !it->second.dm_open)
        throw Error(ErrorCode::Blocked, actor_id + " does not accept messages");
    const auto& persona = *it->second.persona;
    if (persona.blocks_sender) throw Error(ErrorCode::Blocked, actor_id + " has blocked the sender");

    const int index = ++outbound_count_[message.conversation_id];
    DeliveryReceipt receipt{message.conversation_id, message.message_id, now_};

    const bool silenced = persona.disengage_after && index > *persona.disengage_after;
    if (silenced || index > static_cast<int>(persona.script.size())) return receipt;

    const double latency = sample_latency(actor_id, index);
    const auto& step = persona.script[static_cast<std::size_t>(index - 1)];
    double offset = 0.0;
    int ordinal = 0;
    for (const auto& scripted : step.messages) {
        offset = std::max(offset + (ordinal == 0 ? 0.0 : kBurstSpacingSeconds), scripted.offset_seconds);
        ++ordinal;
        Timer t;
        t.due = now_ + seconds_to_ms(latency + offset);
        t.conversation_id = message.conversation_id;
        t.sequence = next_sequence_++;

        auto& ev = t.event;
        ev.conversation_id = message.conversation_id;
        ev.sequence = t.sequence;
        ev.received_at = t.due;
        ev.message.message_id = message.conversation_id + "/in" + std::to_string(t.sequence);
        ev.message.direction = Direction::Inbound;
        ev.message.timestamp = t.due;
        ev.message.text = scripted.text;
        for (const auto& media : scripted.media) {
            MediaRef ref;
            ref.media_id = message.conversation_id + "/media" + std::to_string(++media_count_[message.conversation_id]);
            ref.kind = media.kind;
            ref.person_labels = media.person_labels;
            ref.content_hash = content_digest(media.payload);
            ev.media_payloads.emplace(ref.media_id, media.payload);
            ev.message.media.push_back(std::move(ref));
        }
        timers_.push(std::move(t));
    }
    return receipt;
}

std::size_t SimNet::advance_locked(Timestamp target) {
    std::size_t fired = 0;
    while (!timers_.empty() && timers_.top().due <= target) {
        delivered_.push_back(timers_.top().event);
        timers_.pop();
        ++fired;
    }
    now_ = std::max(now_, target);
    return fired;
}

std::size_t SimNet::advance_time(double seconds) {
    if (seconds < 0) throw Error(ErrorCode::ValidationFailure, "cannot advance time backwards");
    std::lock_guard lock(mutex_);
    return advance_locked(now_ + seconds_to_ms(seconds));
}

std::size_t SimNet::advance_to(Timestamp t) {
    std::lock_guard lock(mutex_);
    return advance_locked(t);
}

std::optional<Timestamp> SimNet::next_event_time() const {
    std::lock_guard lock(mutex_);
    if (timers_.empty()) return std::nullopt;
    return timers_.top().due;
}

std::size_t SimNet::pending_timers() const {
    std::lock_guard lock(mutex_);
    return timers_.size();
}

std::vector<InboundEvent> SimNet::poll_events(Timestamp since) {
    std::lock_guard lock(mutex_);
    std::vector<InboundEvent> out;
    for (const auto& ev : delivered_)
        if (ev.received_at > since) out.push_back(ev);
    std::stable_sort(out.begin(), out.end(), [](const InboundEvent& a, const InboundEvent& b) {
        if (a.received_at != b.received_at) return a.received_at < b.received_at;
        if (a.conversation_id != b.conversation_id) return a.conversation_id < b.conversation_id;
        return a.sequence < b.sequence;
    });
    return out;
}

// ---- live stub ----

Timestamp LiveTransport::now() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void LiveTransport::unavailable() const {
    throw Error(ErrorCode::BackendUnavailable,
                enabled_ ? "live backend has no client bound in this build" : "live backend is not enabled");
}

std::vector<ChannelHandle> LiveTransport::query_directory(const DirectoryQuery&) { unavailable(); }
void LiveTransport::join_channel(const ChannelHandle&) { unavailable(); }
ChannelHistory LiveTransport::fetch_history(const ChannelHandle&, int) { unavailable(); }
bool LiveTransport::can_message(const std::string&) { return false; }
DeliveryReceipt LiveTransport::send_message(const std::string&, const OutboundMessage&) { unavailable(); }
std::vector<InboundEvent> LiveTransport::poll_events(Timestamp) { unavailable(); }

} // namespace honeywire
