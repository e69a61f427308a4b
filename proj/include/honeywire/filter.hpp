#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/llm.hpp"
#include "honeywire/store.hpp"

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace honeywire {

inline constexpr std::string_view kTruncationMarker = "...[truncated]";

struct ChannelDigest {
    ChannelHandle handle;
    std::string pinned_excerpt;
    std::string message_excerpt;
    std::map<MediaKind, int> media_summary;

    bool empty() const { return pinned_excerpt.empty() && message_excerpt.empty(); }
    std::string render() const;
};

struct FilterConfig {
    std::size_t digest_budget = 4000;  // bytes, shared by pins and messages
    std::string prompt_template = "Does this channel advertise paid adult chat services? Answer yes or no, then one sentence of rationale.\n\n{digest}";
    std::vector<std::string> refusal_phrases = default_refusal_phrases();
};

FilterConfig parse_filter_config(const Json& j, const std::string& prompt_template = {});

// Pins first, then messages newest first, cut at the byte budget on a UTF-8 boundary.
ChannelDigest make_digest(const ChannelRecord& record, std::size_t budget);

RelevanceVerdict judge_relevance(const ChannelDigest& digest, ChatModel& llm, const FilterConfig& config);

// Maps a raw model answer onto a verdict. Exposed for tests.
RelevanceVerdict parse_relevance_answer(const ChatCompletion& reply, const std::vector<std::string>& refusal_phrases);

class EscalationQueue {
public:
    explicit EscalationQueue(Store& store) : store_(store) {}

    // Throws InvalidVerdict unless the verdict is Borderline or Refusal.
    EscalationItem enqueue(const RelevanceVerdict& verdict, const ChannelHandle& handle, Timestamp at);

    // Throws UnknownEscalation, AlreadyResolved, or InvalidVerdict for non-binary decisions.
    ChannelRecord apply_human_verdict(const std::string& escalation_id, Decision decision, const std::string& rationale,
                                      Timestamp at);

    // Re-opens a channel that was already settled and records the human's verdict on it.
    ChannelRecord override_verdict(const ChannelHandle& handle, Decision decision, const std::string& rationale,
                                   Timestamp at);

    std::vector<EscalationItem> list(bool unresolved_only) const;

private:
    Store& store_;
    std::mutex mutex_;
};

struct FilterSummary {
    std::map<Decision, int> counts;
    int escalated = 0;
};

// Judges every channel in the store that has no verdict yet and escalates the uncertain ones.
FilterSummary run_filter(Store& store, ChatModel& llm, const FilterConfig& config, Timestamp at);

// Channels whose current verdict makes them worth engaging: Relevant, or a refusal not yet overturned.
std::vector<ChannelRecord> channels_of_interest(const State& state);

} // namespace honeywire
