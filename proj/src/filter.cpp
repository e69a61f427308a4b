#include "honeywire/filter.hpp"

#include "honeywire/error.hpp"

#include <cctype>
#include <cstdio>

namespace honeywire {

namespace {

// Largest prefix of `s` within `limit` bytes that does not split a UTF-8 sequence.
std::size_t utf8_cut(std::string_view s, std::size_t limit) {
    if (limit >= s.size()) return s.size();
    std::size_t cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    return cut;
}

// Appends `piece` while room remains. Returns false once the budget is exhausted.
bool append_within(std::string& out, std::string_view piece, std::size_t& remaining) {
    if (piece.size() <= remaining) {
        out += piece;
        remaining -= piece.size();
        return true;
    }
    out.append(piece.substr(0, utf8_cut(piece, remaining)));
    out += kTruncationMarker;
    remaining = 0;
    return false;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_answer_separator(std::string_view rest) {
    std::size_t i = 0;
    while (i < rest.size() && (rest[i] == ' ' || rest[i] == '-' || rest[i] == ',' || rest[i] == '.' || rest[i] == ':'))
        ++i;
    return trim(rest.substr(i));
}

} // namespace

std::string ChannelDigest::render() const {
    std::string out = "Channel: @" + handle.canonical + "\n";
    if (!pinned_excerpt.empty()) out += "Pinned:\n" + pinned_excerpt + "\n";
    if (!message_excerpt.empty()) out += "Recent messages:\n" + message_excerpt + "\n";
    if (!media_summary.empty()) {
        out += "Media:";
        for (const auto& [kind, n] : media_summary) out += " " + std::string(to_string(kind)) + "=" + std::to_string(n);
        out += "\n";
    }
    return out;
}

FilterConfig parse_filter_config(const Json& j, const std::string& prompt_template) {
    FilterConfig c;
    c.digest_budget = j.value("digest_budget", c.digest_budget);
    if (j.contains("refusal_phrases")) c.refusal_phrases = j.at("refusal_phrases").get<std::vector<std::string>>();
    if (!prompt_template.empty()) c.prompt_template = prompt_template;
    if (c.digest_budget == 0) throw Error(ErrorCode::ConfigInvalid, "digest_budget must be positive");
    if (c.prompt_template.find("{digest}") == std::string::npos)
        throw Error(ErrorCode::ConfigInvalid, "relevance prompt template lacks {digest}");
    return c;
}

ChannelDigest make_digest(const ChannelRecord& record, std::size_t budget) {
    ChannelDigest d;
    d.handle = record.handle;
    std::size_t remaining = budget;
    bool room = true;
    for (const auto& m : record.pinned_posts) {
        if (!room) break;
        room = append_within(d.pinned_excerpt, m.text + "\n", remaining);
    }
    for (const auto& m : record.recent_messages) {
        if (!room) break;
        room = append_within(d.message_excerpt, m.text + "\n", remaining);
    }
    auto count_media = [&](const std::vector<ChatMessage>& messages) {
        for (const auto& m : messages)
            for (const auto& media : m.media) ++d.media_summary[media.kind];
    };
    count_media(record.pinned_posts);
    count_media(record.recent_messages);
    return d;
}

RelevanceVerdict parse_relevance_answer(const ChatCompletion& reply, const std::vector<std::string>& refusal_phrases) {
    RelevanceVerdict v;
    v.judged_by = Judge::Model;
    if (is_refusal(reply, refusal_phrases)) {
        v.decision = Decision::Refusal;
        v.rationale = "model refused: " + trim(reply.text);
        return v;
    }
    const auto text = trim(reply.text);
    const auto lower = ascii_lower(text);
    auto word_boundary = [&](std::size_t n) {
        return lower.size() == n || !std::isalnum(static_cast<unsigned char>(lower[n]));
    };
    if (lower.starts_with("yes") && word_boundary(3)) {
        v.decision = Decision::Relevant;
        v.rationale = strip_answer_separator(std::string_view(text).substr(3));
    } else if (lower.starts_with("no") && word_boundary(2)) {
        v.decision = Decision::Irrelevant;
        v.rationale = strip_answer_separator(std::string_view(text).substr(2));
    } else if (lower.starts_with("是")) {
        v.decision = Decision::Relevant;
        v.rationale = strip_answer_separator(std::string_view(text).substr(std::string_view("是").size()));
    } else if (lower.starts_with("否")) {
        v.decision = Decision::Irrelevant;
        v.rationale = strip_answer_separator(std::string_view(text).substr(std::string_view("否").size()));
    } else {
        v.decision = Decision::Borderline;
        v.rationale = text.empty() ? "empty answer" : text;
    }
    return v;
}

RelevanceVerdict judge_relevance(const ChannelDigest& digest, ChatModel& llm, const FilterConfig& config) {
    if (digest.empty()) throw Error(ErrorCode::ValidationFailure, "empty digest for @" + digest.handle.canonical);
    std::string prompt = config.prompt_template;
    const auto slot = prompt.find("{digest}");
    prompt.replace(slot, std::string_view("{digest}").size(), digest.render());

    ChatRequest req;
    req.task = ChatTask::Relevance;
    req.turns.push_back({"user", prompt});
    try {
        return parse_relevance_answer(llm.complete(req), config.refusal_phrases);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::LlmUnavailable) throw;
        return RelevanceVerdict{Decision::Borderline, "adapter unavailable", Judge::Model};
    }
}

EscalationItem EscalationQueue::enqueue(const RelevanceVerdict& verdict, const ChannelHandle& handle, Timestamp at) {
    if (verdict.decision != Decision::Borderline && verdict.decision != Decision::Refusal)
        throw Error(ErrorCode::InvalidVerdict,
                    "only Borderline or Refusal verdicts are escalated, got " + std::string(to_string(verdict.decision)));
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    store_.read([&](const State& s) { n = s.escalations.size(); });
    char id[32];
    std::snprintf(id, sizeof(id), "esc-%05zu", n + 1);

    EscalationItem item{id, handle, verdict, at, std::nullopt};
    store_.append(EventKind::EscalationQueued,
                  Json{{"escalation_id", item.escalation_id},
                       {"handle", item.handle},
                       {"model_verdict", item.model_verdict},
                       {"queued_at", item.queued_at}},
                  at);
    return item;
}

ChannelRecord EscalationQueue::apply_human_verdict(const std::string& escalation_id, Decision decision,
                                                   const std::string& rationale, Timestamp at) {
    if (decision != Decision::Relevant && decision != Decision::Irrelevant)
        throw Error(ErrorCode::InvalidVerdict, "human verdicts are Relevant or Irrelevant");
    std::lock_guard lock(mutex_);
    std::string handle;
    store_.read([&](const State& s) {
        auto it = s.escalations.find(escalation_id);
        if (it == s.escalations.end()) throw Error(ErrorCode::UnknownEscalation, "unknown escalation " + escalation_id);
        if (it->second.resolved) throw Error(ErrorCode::AlreadyResolved, "escalation " + escalation_id + " already resolved");
        handle = it->second.handle.canonical;
    });
    const RelevanceVerdict verdict{decision, rationale, Judge::Human};
    store_.append(EventKind::EscalationResolved, Json{{"escalation_id", escalation_id}, {"verdict", verdict}}, at);
    ChannelRecord record;
    store_.read([&](const State& s) { record = s.channels.at(handle); });
    return record;
}

ChannelRecord EscalationQueue::override_verdict(const ChannelHandle& handle, Decision decision,
                                                const std::string& rationale, Timestamp at) {
    if (decision != Decision::Relevant && decision != Decision::Irrelevant)
        throw Error(ErrorCode::InvalidVerdict, "human verdicts are Relevant or Irrelevant");
    std::lock_guard lock(mutex_);
    bool known = false;
    store_.read([&](const State& s) { known = s.channels.contains(handle.canonical); });
    if (!known) throw Error(ErrorCode::UnknownChannel, "unknown channel @" + handle.canonical);
    const RelevanceVerdict verdict{decision, rationale, Judge::Human};
    store_.append(EventKind::ChannelJudged, Json{{"handle", handle.canonical}, {"verdict", verdict}}, at);
    ChannelRecord record;
    store_.read([&](const State& s) { record = s.channels.at(handle.canonical); });
    return record;
}

std::vector<EscalationItem> EscalationQueue::list(bool unresolved_only) const {
    std::vector<EscalationItem> out;
    store_.read([&](const State& s) {
        for (const auto& [id, item] : s.escalations)
            if (!unresolved_only || !item.resolved) out.push_back(item);
    });
    return out;
}

FilterSummary run_filter(Store& store, ChatModel& llm, const FilterConfig& config, Timestamp at) {
    std::vector<ChannelRecord> pending;
    store.read([&](const State& s) {
        for (const auto& [k, record] : s.channels)
            if (!record.verdict) pending.push_back(record);
    });

    FilterSummary summary;
    EscalationQueue queue(store);
    for (const auto& record : pending) {
        const auto digest = make_digest(record, config.digest_budget);
        if (digest.empty()) continue;
        const auto verdict = judge_relevance(digest, llm, config);
        store.append(EventKind::ChannelJudged, Json{{"handle", record.handle.canonical}, {"verdict", verdict}}, at);
        ++summary.counts[verdict.decision];
        if (verdict.decision == Decision::Borderline || verdict.decision == Decision::Refusal) {
            queue.enqueue(verdict, record.handle, at);
            ++summary.escalated;
        }
    }
    return summary;
}

std::vector<ChannelRecord> channels_of_interest(const State& state) {
    std::vector<ChannelRecord> out;
    for (const auto& [k, record] : state.channels) {
        if (!record.verdict) continue;
        if (record.verdict->decision == Decision::Relevant || record.verdict->decision == Decision::Refusal)
            out.push_back(record);
    }
    return out;
}

} // namespace honeywire
