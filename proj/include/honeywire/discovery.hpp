#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/llm.hpp"
#include "honeywire/store.hpp"
#include "honeywire/transport.hpp"

#include <deque>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace honeywire {

struct DiscoveryConfig {
    std::vector<std::string> seed_keywords;
    std::vector<std::string> seed_channels;
    int synonym_fanout = 0;
    int depth_cap = 3;
    int harvest_limit = 1000;
    int directory_max_results = 50;
    // Lowercase regexes marking a post as a service offer.
    std::vector<std::string> offer_patterns = {"pay to chat", "video chat", "视频聊天", "一对一", "私人定制"};
};

DiscoveryConfig parse_discovery_config(const Json& j);

struct KeywordExpansion {
    std::vector<std::string> terms;
    bool degraded = false;  // the model was unavailable; seeds only
};

KeywordExpansion expand_keywords(const std::vector<std::string>& seeds, int fanout, ChatModel& llm);

// "@handle" tokens and t.me links, canonicalized, first occurrence order.
std::vector<ChannelHandle> extract_links(std::string_view text);

struct DiscoveryFrontier {
    std::set<std::string> visited;
    struct Entry {
        ChannelHandle handle;
        int depth = 0;
        DiscoverySource source;
    };
    std::deque<Entry> queue;

    // False if the handle was already visited.
    bool offer(const ChannelHandle& handle, int depth, DiscoverySource source);
};

struct DiscoveryResult {
    std::vector<ChannelRecord> records;  // canonical order
    KeywordExpansion keywords;
    bool partial = false;
    std::string error;
};

DiscoveryResult run_discovery(const DiscoveryConfig& config, Transport& transport, ChatModel& llm);

class OfferMatcher {
public:
    explicit OfferMatcher(const std::vector<std::string>& patterns);
    bool matches(std::string_view text) const;

private:
    std::vector<std::regex> regexes_;
};

std::vector<ActorProfile> extract_actors(const std::vector<ChannelRecord>& records, const OfferMatcher& matcher);

// Appends ChannelDiscovered events for records the store has not seen.
std::size_t publish_channels(Store& store, const std::vector<ChannelRecord>& records, Timestamp at);
// Appends ActorIdentified events for actors the store has not seen.
std::size_t publish_actors(Store& store, const std::vector<ActorProfile>& actors, Timestamp at);

} // namespace honeywire
