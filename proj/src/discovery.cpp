#include "honeywire/discovery.hpp"

#include "honeywire/error.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace honeywire {

DiscoveryConfig parse_discovery_config(const Json& j) {
    DiscoveryConfig c;
    c.seed_keywords = j.value("seed_keywords", c.seed_keywords);
    c.seed_channels = j.value("seed_channels", c.seed_channels);
    c.synonym_fanout = j.value("synonym_fanout", c.synonym_fanout);
    c.depth_cap = j.value("depth_cap", c.depth_cap);
    c.harvest_limit = j.value("harvest_limit", c.harvest_limit);
    c.directory_max_results = j.value("directory_max_results", c.directory_max_results);
    c.offer_patterns = j.value("offer_patterns", c.offer_patterns);
    if (c.synonym_fanout < 0) throw Error(ErrorCode::ConfigInvalid, "synonym_fanout must be >= 0");
    if (c.depth_cap < 0) throw Error(ErrorCode::ConfigInvalid, "depth_cap must be >= 0");
    if (c.harvest_limit < 1) throw Error(ErrorCode::ConfigInvalid, "harvest_limit must be >= 1");
    if (c.directory_max_results < 1) throw Error(ErrorCode::ConfigInvalid, "directory_max_results must be >= 1");
    return c;
}

KeywordExpansion expand_keywords(const std::vector<std::string>& seeds, int fanout, ChatModel& llm) {
    if (fanout < 0) throw Error(ErrorCode::ValidationFailure, "fanout must be >= 0");
    KeywordExpansion out;
    std::set<std::string> seen;
    auto add = [&](std::string term) {
        auto b = term.find_first_not_of(" \t\r\n-*•0123456789.");
        auto e = term.find_last_not_of(" \t\r\n");
        if (b == std::string::npos) return false;
        term = term.substr(b, e - b + 1);
        if (!seen.insert(ascii_lower(term)).second) return false;
        out.terms.push_back(std::move(term));
        return true;
    };
    for (const auto& s : seeds) add(s);
    if (fanout == 0) return out;

    for (const auto& seed : seeds) {
        ChatRequest req;
        req.task = ChatTask::Synonyms;
        req.system = "You suggest alternative search phrases with the same meaning. Reply with one phrase per line.";
        req.turns.push_back({"user", "Suggest up to " + std::to_string(fanout) + " alternative expressions for: " + seed});
        ChatCompletion reply;
        try {
            reply = llm.complete(req);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LlmUnavailable) throw;
            out.degraded = true;
            continue;
        }
        if (reply.refused) continue;
        std::istringstream lines(reply.text);
        std::string line;
        int taken = 0;
        while (taken < fanout && std::getline(lines, line)) {
            // Duplicates of earlier terms do not use up the fanout.
            if (add(line)) ++taken;
        }
    }
    return out;
}

std::vector<ChannelHandle> extract_links(std::string_view text) {
    auto handle_char = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    };
    std::vector<std::pair<std::size_t, std::string>> found;

    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '@') continue;
        // "user@example.com" is not a mention.
        if (i > 0 && (handle_char(text[i - 1]) || text[i - 1] == '.')) continue;
        std::size_t j = i + 1;
        while (j < text.size() && handle_char(text[j])) ++j;
        if (j > i + 1) found.emplace_back(i, std::string(text.substr(i + 1, j - i - 1)));
    }

    static const std::regex link(R"((?:https?://)?(?:www\.)?(?:t\.me|telegram\.me)/(?:s/)?([A-Za-z0-9_]+))",
                                 std::regex::ECMAScript | std::regex::icase);
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), link); it != std::sregex_iterator(); ++it) {
        const auto name = (*it)[1].str();
        if (ascii_lower(name) == "joinchat") continue;
        found.emplace_back(static_cast<std::size_t>(it->position(0)), name);
    }

    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ChannelHandle> out;
    std::set<std::string> seen;
    for (const auto& [pos, name] : found) {
        auto h = canonicalize_handle(name);
        if (seen.insert(h.canonical).second) out.push_back(std::move(h));
    }
    return out;
}

bool DiscoveryFrontier::offer(const ChannelHandle& handle, int depth, DiscoverySource source) {
    if (!visited.insert(handle.canonical).second) return false;
    queue.push_back({handle, depth, std::move(source)});
    return true;
}

DiscoveryResult run_discovery(const DiscoveryConfig& config, Transport& transport, ChatModel& llm) {
    DiscoveryResult result;
    DiscoveryFrontier frontier;
    try {
        result.keywords = expand_keywords(config.seed_keywords, config.synonym_fanout, llm);
        for (const auto& term : result.keywords.terms) {
            for (const auto& h : transport.query_directory({term, config.directory_max_results}))
                frontier.offer(h, 0, {SourceKind::DirectoryQuery, term});
        }
        for (const auto& raw : config.seed_channels) frontier.offer(canonicalize_handle(raw), 0, {SourceKind::SeedConfig, ""});

        while (!frontier.queue.empty()) {
            auto entry = std::move(frontier.queue.front());
            frontier.queue.pop_front();
            try {
                transport.join_channel(entry.handle);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::UnknownChannel || e.code() == ErrorCode::JoinRejected) continue;
                throw;
            }
            auto history = transport.fetch_history(entry.handle, config.harvest_limit);

            ChannelRecord record;
            record.handle = entry.handle;
            record.title = history.title;
            record.source = entry.source;
            record.depth = entry.depth;
            record.pinned_posts = std::move(history.pinned);
            record.recent_messages = std::move(history.messages);

            if (entry.depth < config.depth_cap) {
                auto follow = [&](const ChatMessage& m) {
                    for (const auto& link : extract_links(m.text))
                        frontier.offer(link, entry.depth + 1, {SourceKind::CrossLink, entry.handle.canonical});
                };
                for (const auto& m : record.pinned_posts) follow(m);
                for (const auto& m : record.recent_messages) follow(m);
            }
            result.records.push_back(std::move(record));
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BackendUnavailable) throw;
        result.partial = true;
        result.error = e.what();
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const ChannelRecord& a, const ChannelRecord& b) { return a.handle.canonical < b.handle.canonical; });
    return result;
}

OfferMatcher::OfferMatcher(const std::vector<std::string>& patterns) {
    for (const auto& p : patterns) {
        try {
            regexes_.emplace_back(ascii_lower(p), std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw Error(ErrorCode::ConfigInvalid, "bad offer pattern '" + p + "': " + e.what());
        }
    }
}

bool OfferMatcher::matches(std::string_view text) const {
    const auto lower = ascii_lower(text);
    return std::any_of(regexes_.begin(), regexes_.end(), [&](const std::regex& r) { return std::regex_search(lower, r); });
}

std::vector<ActorProfile> extract_actors(const std::vector<ChannelRecord>& records, const OfferMatcher& matcher) {
    std::map<std::string, ActorProfile> by_id;
    for (const auto& r : records) {
        auto consider = [&](const ChatMessage& m) {
            if (m.sender.empty() || !matcher.matches(m.text)) return;
            auto& profile = by_id[m.sender];
            profile.actor_id = m.sender;
            profile.source_channels.insert(r.handle.canonical);
        };
        for (const auto& m : r.pinned_posts) consider(m);
        for (const auto& m : r.recent_messages) consider(m);
    }
    std::vector<ActorProfile> out;
    out.reserve(by_id.size());
    for (auto& [id, p] : by_id) out.push_back(std::move(p));
    return out;
}

std::size_t publish_channels(Store& store, const std::vector<ChannelRecord>& records, Timestamp at) {
    std::set<std::string> known;
    store.read([&](const State& s) {
        for (const auto& [k, v] : s.channels) known.insert(k);
    });
    std::size_t n = 0;
    for (const auto& r : records) {
        if (known.contains(r.handle.canonical)) continue;
        store.append(EventKind::ChannelDiscovered, Json{{"channel", r}}, at);
        ++n;
    }
    return n;
}

std::size_t publish_actors(Store& store, const std::vector<ActorProfile>& actors, Timestamp at) {
    std::set<std::string> known;
    store.read([&](const State& s) {
        for (const auto& [k, v] : s.actors) known.insert(k);
    });
    std::size_t n = 0;
    for (const auto& a : actors) {
        if (known.contains(a.actor_id)) continue;
        store.append(EventKind::ActorIdentified, Json{{"actor", a}}, at);
        ++n;
    }
    return n;
}

} // namespace honeywire
