#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/llm.hpp"
#include "honeywire/store.hpp"
#include "honeywire/transport.hpp"
#include "honeywire/vision.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace honeywire {

// Case-insensitive phrase rewriting, longest phrase first.
class SubstitutionTable {
public:
    SubstitutionTable() = default;
    // Throws ConfigInvalid if a replacement contains any phrase (that would allow rewrite loops).
    explicit SubstitutionTable(std::vector<std::pair<std::string, std::string>> entries);

    std::string apply(std::string_view text) const;
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    // Union of both tables; entries of `extra` win on identical phrases.
    SubstitutionTable merged(const SubstitutionTable& extra) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;  // sorted longest phrase first
};

SubstitutionTable default_substitutions();
SubstitutionTable parse_substitutions(const Json& j);

inline std::string substitute(std::string_view text, const SubstitutionTable& table) { return table.apply(text); }

struct EngagementPolicy {
    std::string opener_text = "Hi, how much do your services cost?";
    int max_retries = 3;
    double no_response_timeout_seconds = 72.0 * 3600.0;
    std::optional<int> max_rounds;
    bool auto_approve = false;
    int regeneration_cap = 5;
    std::size_t context_messages = 20;
    std::string system_prompt =
        "You are chatting as a curious but casual customer. Keep replies short and colloquial, and steer the "
        "conversation toward agreeing on a price and how to pay.";
    // Extra rewrites applied from the first retry onward.
    SubstitutionTable softening;
};

EngagementPolicy parse_engagement_policy(const Json& j, const std::string& system_prompt = {});

inline constexpr std::string_view kAutoApproveOperator = "auto-approve";

struct DraftOutcome {
    std::optional<std::string> draft_id;  // set when a draft awaits a decision (or was auto-sent)
    bool terminated = false;
    int refusals = 0;
};

// Drives every conversation through the session state machine. Each mutation is an event in the
// store; the engine keeps no state of its own beyond per-conversation locks.
class EngagementEngine {
public:
    EngagementEngine(Store& store, Transport& transport, ChatModel& llm, OcrService& ocr,
                     const PaymentExtractor& extractor, EngagementPolicy policy,
                     SubstitutionTable substitutions = default_substitutions(),
                     std::vector<std::string> refusal_phrases = default_refusal_phrases());

    // Throws DuplicateSession if the actor already has an active conversation.
    std::string open_session(const std::string& actor_id);

    // Builds the model request for the conversation at a given softening tier (0 = none).
    ChatRequest build_request(const Conversation& conversation, int tier) const;

    // One drafting attempt. Logs the DraftCreated event either way; throws LlmRefusal after
    // logging a refused attempt and LlmUnavailable without logging anything.
    std::string draft_reply(const std::string& conversation_id);

    // After a refusal: true if another attempt is allowed, false once the session was terminated.
    bool handle_refusal(const std::string& conversation_id);

    // Drafts until a draft is pending or the retry budget is spent. Auto-approves when configured.
    DraftOutcome respond(const std::string& conversation_id);

    // Throws UnknownConversation or SessionTerminated.
    Conversation on_inbound(const InboundEvent& event);

    std::vector<std::string> check_timeouts(Timestamp now);

    // Throws NotPendingApproval unless a draft awaits a decision (Terminate is accepted anytime),
    // StaleDraft when `draft_id` is not the pending draft.
    Conversation apply_operator_decision(const std::string& conversation_id, const std::string& draft_id,
                                         DecisionKind decision, const std::string& operator_id,
                                         const std::string& edited_text = {});

    // Hands an approved draft to the transport. Throws UnapprovedSend if no Approve/Edit exists.
    void dispatch(const std::string& conversation_id, const std::string& draft_id);

    // Deadline after which check_timeouts would terminate the conversation.
    std::optional<Timestamp> timeout_deadline(const std::string& conversation_id) const;

    Conversation conversation(const std::string& conversation_id) const;
    const EngagementPolicy& policy() const { return policy_; }
    Store& store() { return store_; }
    Transport& transport() { return transport_; }

private:
    std::mutex& lock_for(const std::string& conversation_id);
    void terminate_locked(const std::string& conversation_id, OutcomeKind kind);
    std::string draft_locked(const std::string& conversation_id);
    DraftOutcome respond_locked(const std::string& conversation_id);
    void dispatch_locked(const std::string& conversation_id, const std::string& draft_id);
    void decide_locked(const std::string& conversation_id, const std::string& draft_id, DecisionKind decision,
                       const std::string& operator_id, const std::string& edited_text);
    std::string queue_opener_locked(const std::string& conversation_id);
    Timestamp now() const;

    Store& store_;
    Transport& transport_;
    ChatModel& llm_;
    OcrService& ocr_;
    const PaymentExtractor& extractor_;
    EngagementPolicy policy_;
    SubstitutionTable substitutions_;
    std::vector<std::string> refusal_phrases_;

    std::mutex locks_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
    std::mutex open_mutex_;
};

// True when the session currently waits on the other party.
bool awaiting_counterpart(SessionState state);

} // namespace honeywire
