#include "honeywire/engagement.hpp"

#include "honeywire/error.hpp"

#include <algorithm>

namespace honeywire {

namespace {

constexpr int kMaxRewritePasses = 8;

bool equals_ci_at(std::string_view text, std::size_t pos, std::string_view phrase) {
    if (pos + phrase.size() > text.size()) return false;
    for (std::size_t i = 0; i < phrase.size(); ++i) {
        auto a = static_cast<unsigned char>(text[pos + i]);
        auto b = static_cast<unsigned char>(phrase[i]);
        if (std::tolower(a) != std::tolower(b)) return false;
    }
    return true;
}

std::string rewrite_once(std::string_view text, const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        bool hit = false;
        for (const auto& [phrase, replacement] : entries) {
            if (equals_ci_at(text, i, phrase)) {
                out += replacement;
                i += phrase.size();
                hit = true;
                break;
            }
        }
        if (!hit) out += text[i++];
    }
    return out;
}

std::string message_content(const ChatMessage& m) {
    std::string content = m.text;
    if (m.ocr_text && !m.ocr_text->empty()) {
        if (!content.empty()) content += "\n";
        content += "[text in attached image]\n" + *m.ocr_text;
    } else if (!m.media.empty() && content.empty()) {
        content = "[image]";
    }
    return content;
}

} // namespace

// ---- substitution ----

SubstitutionTable::SubstitutionTable(std::vector<std::pair<std::string, std::string>> entries) {
    for (const auto& [phrase, replacement] : entries) {
        if (phrase.empty()) throw Error(ErrorCode::ConfigInvalid, "empty substitution phrase");
    }
    for (const auto& [p1, r1] : entries) {
        for (const auto& [p2, r2] : entries) {
            if (contains_ci(r1, p2))
                throw Error(ErrorCode::ConfigInvalid,
                            "replacement '" + r1 + "' for '" + p1 + "' contains the phrase '" + p2 + "'");
        }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    entries_ = std::move(entries);
}

std::string SubstitutionTable::apply(std::string_view text) const {
    // Repeat until stable so that a rewrite cannot leave a phrase straddling its boundary.
    std::string current(text);
    for (int pass = 0; pass < kMaxRewritePasses; ++pass) {
        auto next = rewrite_once(current, entries_);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

SubstitutionTable SubstitutionTable::merged(const SubstitutionTable& extra) const {
    std::vector<std::pair<std::string, std::string>> all = extra.entries_;
    for (const auto& e : entries_) {
        const bool shadowed = std::any_of(all.begin(), all.end(),
                                          [&](const auto& x) { return ascii_lower(x.first) == ascii_lower(e.first); });
        if (!shadowed) all.push_back(e);
    }
    return SubstitutionTable(std::move(all));
}

SubstitutionTable default_substitutions() {
    return SubstitutionTable(std::vector<std::pair<std::string, std::string>>{{"nude chat", "chat"}});
}

SubstitutionTable parse_substitutions(const Json& j) {
    std::vector<std::pair<std::string, std::string>> entries;
    if (!j.is_array()) throw Error(ErrorCode::ConfigInvalid, "substitution table must be an array");
    for (const auto& e : j) {
        if (e.is_array() && e.size() == 2)
            entries.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
        else if (e.is_object())
            entries.emplace_back(e.at("phrase").get<std::string>(), e.at("replacement").get<std::string>());
        else
            throw Error(ErrorCode::ConfigInvalid, "substitution entries are [phrase, replacement] pairs");
    }
    return SubstitutionTable(std::move(entries));
}

EngagementPolicy parse_engagement_policy(const Json& j, const std::string& system_prompt) {
    EngagementPolicy p;
    p.opener_text = j.value("opener_text", p.opener_text);
    p.max_retries = j.value("max_retries", p.max_retries);
    p.no_response_timeout_seconds = j.value("no_response_timeout_hours", p.no_response_timeout_seconds / 3600.0) * 3600.0;
    if (j.contains("max_rounds") && !j.at("max_rounds").is_null()) p.max_rounds = j.at("max_rounds").get<int>();
    p.auto_approve = j.value("auto_approve", p.auto_approve);
    p.regeneration_cap = j.value("regeneration_cap", p.regeneration_cap);
    p.context_messages = j.value("context_messages", p.context_messages);
    if (!system_prompt.empty()) p.system_prompt = system_prompt;
    if (j.contains("softening")) p.softening = parse_substitutions(j.at("softening"));

    if (p.opener_text.empty()) throw Error(ErrorCode::ConfigInvalid, "opener_text must not be empty");
    if (p.max_retries < 1 || p.max_retries > 3) throw Error(ErrorCode::ConfigInvalid, "max_retries must be within 1..3");
    if (p.no_response_timeout_seconds <= 0) throw Error(ErrorCode::ConfigInvalid, "no_response_timeout must be positive");
    if (p.max_rounds && *p.max_rounds < 1) throw Error(ErrorCode::ConfigInvalid, "max_rounds must be positive");
    if (p.regeneration_cap < 0) throw Error(ErrorCode::ConfigInvalid, "regeneration_cap must be >= 0");
    if (p.context_messages == 0) throw Error(ErrorCode::ConfigInvalid, "context_messages must be positive");
    return p;
}

bool awaiting_counterpart(SessionState state) {
    return state == SessionState::ContactSent || state == SessionState::AwaitingReply;
}

// ---- engine ----

EngagementEngine::EngagementEngine(Store& store, Transport& transport, ChatModel& llm, OcrService& ocr,
                                   const PaymentExtractor& extractor, EngagementPolicy policy,
                                   SubstitutionTable substitutions, std::vector<std::string> refusal_phrases)
    : store_(store),
      transport_(transport),
      llm_(llm),
      ocr_(ocr),
      extractor_(extractor),
      policy_(std::move(policy)),
      substitutions_(std::move(substitutions)),
      refusal_phrases_(std::move(refusal_phrases)) {
    if (policy_.auto_approve && !transport_.simulated())
        throw Error(ErrorCode::ConfigInvalid, "auto-approve is only allowed on the simulated transport");
}

Timestamp EngagementEngine::now() const { return transport_.now(); }

std::mutex& EngagementEngine::lock_for(const std::string& conversation_id) {
    std::lock_guard guard(locks_mutex_);
    auto& slot = locks_[conversation_id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

Conversation EngagementEngine::conversation(const std::string& conversation_id) const {
    Conversation c;
    store_.read([&](const State& s) {
        auto it = s.conversations.find(conversation_id);
        if (it == s.conversations.end())
            throw Error(ErrorCode::UnknownConversation, "unknown conversation " + conversation_id);
        c = it->second;
    });
    return c;
}

std::string EngagementEngine::open_session(const std::string& actor_id) {
    std::lock_guard open_guard(open_mutex_);
    std::string conversation_id;
    store_.read([&](const State& s) {
        if (!s.actors.contains(actor_id)) throw Error(ErrorCode::ValidationFailure, "unknown actor " + actor_id);
        if (auto it = s.active_session_by_actor.find(actor_id); it != s.active_session_by_actor.end())
            throw Error(ErrorCode::DuplicateSession, actor_id + " already has session " + it->second);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "conv-%05zu", s.conversations.size() + 1);
        conversation_id = buf;
    });

    std::lock_guard guard(lock_for(conversation_id));
    store_.append(EventKind::SessionOpened,
                  Json{{"conversation_id", conversation_id}, {"actor", actor_id}, {"max_retries", policy_.max_retries}},
                  now());
    queue_opener_locked(conversation_id);
    return conversation_id;
}

std::string EngagementEngine::queue_opener_locked(const std::string& conversation_id) {
    std::size_t drafts = 0;
    store_.read([&](const State& s) {
        for (const auto& [id, d] : s.drafts)
            if (d.draft.conversation_id == conversation_id) ++drafts;
    });
    const auto draft_id = conversation_id + "/d" + std::to_string(drafts + 1);
    store_.append(EventKind::DraftCreated,
                  Json{{"conversation_id", conversation_id},
                       {"draft_id", draft_id},
                       {"text", policy_.opener_text},
                       {"purpose", "Opener"},
                       {"tier", 0},
                       {"refused", false}},
                  now());
    if (policy_.auto_approve) {
        decide_locked(conversation_id, draft_id, DecisionKind::Approve, std::string(kAutoApproveOperator), {});
        dispatch_locked(conversation_id, draft_id);
    }
    return draft_id;
}

ChatRequest EngagementEngine::build_request(const Conversation& c, int tier) const {
    ChatRequest req;
    req.task = ChatTask::Engagement;
    if (tier >= 3) {
        req.system = "You are a polite customer. Write one short, neutral follow-up message.";
        req.turns.push_back({"user", "Write a brief, neutral message asking how to continue with the purchase."});
        return req;
    }
    const auto table = tier >= 1 ? substitutions_.merged(policy_.softening) : substitutions_;
    req.system = table.apply(policy_.system_prompt);
    const auto first = c.messages.size() > policy_.context_messages ? c.messages.size() - policy_.context_messages : 0;
    for (std::size_t i = first; i < c.messages.size(); ++i) {
        const auto& m = c.messages[i];
        if (m.direction == Direction::Outbound) {
            req.turns.push_back({"assistant", table.apply(m.text)});
        } else if (tier >= 2) {
            req.turns.push_back({"user", "[the seller replied]"});
        } else {
            req.turns.push_back({"user", table.apply(message_content(m))});
        }
    }
    return req;
}

std::string EngagementEngine::draft_locked(const std::string& conversation_id) {
    const auto c = conversation(conversation_id);
    if (c.state == SessionState::Terminated)
        throw Error(ErrorCode::SessionTerminated, conversation_id + " is terminated");
    std::size_t drafts = 0;
    std::optional<std::string> pending;
    store_.read([&](const State& s) {
        pending = s.sessions.at(conversation_id).pending_draft_id;
        for (const auto& [id, d] : s.drafts)
            if (d.draft.conversation_id == conversation_id) ++drafts;
    });
    if (pending) return *pending;
    if (c.state != SessionState::AwaitingReply && c.state != SessionState::Drafting)
        throw Error(ErrorCode::ValidationFailure,
                    "cannot draft a reply in state " + std::string(to_string(c.state)));

    const int tier = c.retry_counter;
    const auto completion = llm_.complete(build_request(c, tier));
    // An empty completion is as useless as a refusal and takes the same retry path.
    const bool refused = is_refusal(completion, refusal_phrases_) || completion.text.find_first_not_of(" \t\r\n") == std::string::npos;
    const auto draft_id = conversation_id + "/d" + std::to_string(drafts + 1);
    store_.append(EventKind::DraftCreated,
                  Json{{"conversation_id", conversation_id},
                       {"draft_id", draft_id},
                       {"text", completion.text},
                       {"purpose", "Reply"},
                       {"tier", tier},
                       {"refused", refused}},
                  now());
    if (refused) throw Error(ErrorCode::LlmRefusal, "model refused to draft for " + conversation_id);
    return draft_id;
}

std::string EngagementEngine::draft_reply(const std::string& conversation_id) {
    std::lock_guard guard(lock_for(conversation_id));
    return draft_locked(conversation_id);
}

bool EngagementEngine::handle_refusal(const std::string& conversation_id) {
    std::lock_guard guard(lock_for(conversation_id));
    const auto c = conversation(conversation_id);
    if (c.state == SessionState::Terminated) return false;
    if (c.retry_counter >= policy_.max_retries) {
        terminate_locked(conversation_id, OutcomeKind::LlmFailure);
        return false;
    }
    return true;
}

DraftOutcome EngagementEngine::respond_locked(const std::string& conversation_id) {
    DraftOutcome out;
    for (;;) {
        try {
            out.draft_id = draft_locked(conversation_id);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LlmRefusal) throw;
            ++out.refusals;
            if (conversation(conversation_id).retry_counter >= policy_.max_retries) {
                terminate_locked(conversation_id, OutcomeKind::LlmFailure);
                out.terminated = true;
                return out;
            }
            continue;
        }
        break;
    }
    if (policy_.auto_approve) {
        bool undecided = false;
        store_.read([&](const State& s) { undecided = s.drafts.at(*out.draft_id).awaiting_decision(); });
        if (undecided) decide_locked(conversation_id, *out.draft_id, DecisionKind::Approve, std::string(kAutoApproveOperator), {});
        dispatch_locked(conversation_id, *out.draft_id);
        out.terminated = conversation(conversation_id).state == SessionState::Terminated;
    }
    return out;
}

DraftOutcome EngagementEngine::respond(const std::string& conversation_id) {
    std::lock_guard guard(lock_for(conversation_id));
    return respond_locked(conversation_id);
}

Conversation EngagementEngine::on_inbound(const InboundEvent& event) {
    const auto& cid = event.conversation_id;
    std::lock_guard guard(lock_for(cid));
    auto c = conversation(cid);
    if (c.state == SessionState::Terminated) throw Error(ErrorCode::SessionTerminated, cid + " is terminated");

    auto message = event.message;
    message.direction = Direction::Inbound;
    message.ocr_text.reset();
    if (!c.messages.empty()) message.timestamp = std::max(message.timestamp, c.messages.back().timestamp + 1);
    message.round_index = next_round_index(c, Direction::Inbound);
    store_.append(EventKind::MessageReceived, Json{{"conversation_id", cid}, {"message", message}}, event.received_at);

    std::vector<OcrResult> ocr;
    for (const auto& media : message.media) {
        if (media.kind != MediaKind::Image) continue;
        auto payload = event.media_payloads.find(media.media_id);
        if (payload == event.media_payloads.end()) continue;
        try {
            auto result = ocr_.extract(media, payload->second);
            store_.append(EventKind::OcrAttached,
                          Json{{"conversation_id", cid},
                               {"message_id", message.message_id},
                               {"media_id", media.media_id},
                               {"text", result.text},
                               {"engine_tag", result.engine_tag}},
                          event.received_at);
            ocr.push_back(std::move(result));
        } catch (const Error& e) {
            // A failed recognition leaves the image without text; the message itself is kept.
            if (e.code() != ErrorCode::EngineUnavailable) throw;
        }
    }

    std::vector<PaymentDisclosure> known;
    store_.read([&](const State& s) { known = s.sessions.at(cid).disclosures; });
    for (const auto& d : extractor_.extract(message.text, std::span<const OcrResult>(ocr), message.message_id)) {
        const bool duplicate = std::any_of(known.begin(), known.end(), [&](const PaymentDisclosure& k) {
            return k.method == d.method && k.detail == d.detail;
        });
        if (duplicate) continue;
        store_.append(EventKind::DisclosureFound, Json{{"conversation_id", cid}, {"disclosure", d}}, event.received_at);
        known.push_back(d);
    }

    c = conversation(cid);
    if (!known.empty()) {
        terminate_locked(cid, OutcomeKind::PaymentObtained);
    } else if (policy_.max_rounds && c.round_counter >= *policy_.max_rounds) {
        terminate_locked(cid, OutcomeKind::OperatorTerminated);
    }
    return conversation(cid);
}

std::optional<Timestamp> EngagementEngine::timeout_deadline(const std::string& conversation_id) const {
    std::optional<Timestamp> deadline;
    store_.read([&](const State& s) {
        auto c = s.conversations.find(conversation_id);
        if (c == s.conversations.end() || !awaiting_counterpart(c->second.state)) return;
        const auto& book = s.sessions.at(conversation_id);
        if (!book.last_outbound_at) return;
        if (book.last_inbound_at && *book.last_inbound_at >= *book.last_outbound_at) return;
        deadline = *book.last_outbound_at + seconds_to_ms(policy_.no_response_timeout_seconds);
    });
    return deadline;
}

std::vector<std::string> EngagementEngine::check_timeouts(Timestamp at) {
    std::vector<std::string> candidates;
    store_.read([&](const State& s) {
        for (const auto& [actor, cid] : s.active_session_by_actor) candidates.push_back(cid);
    });
    std::sort(candidates.begin(), candidates.end());

    std::vector<std::string> expired;
    for (const auto& cid : candidates) {
        std::lock_guard guard(lock_for(cid));
        const auto deadline = timeout_deadline(cid);
        if (!deadline || at < *deadline) continue;
        bool heard_back = false;
        store_.read([&](const State& s) { heard_back = s.sessions.at(cid).last_inbound_at.has_value(); });
        terminate_locked(cid, heard_back ? OutcomeKind::Disengaged : OutcomeKind::NoResponse);
        expired.push_back(cid);
    }
    return expired;
}

void EngagementEngine::terminate_locked(const std::string& conversation_id, OutcomeKind kind) {
    store_.append(EventKind::SessionTerminated,
                  Json{{"conversation_id", conversation_id}, {"outcome", std::string(to_string(kind))}}, now());
}

void EngagementEngine::decide_locked(const std::string& conversation_id, const std::string& draft_id,
                                     DecisionKind decision, const std::string& operator_id,
                                     const std::string& edited_text) {
    Json payload{{"conversation_id", conversation_id},
                 {"draft_id", draft_id},
                 {"decision", std::string(to_string(decision))},
                 {"operator_id", operator_id}};
    if (decision == DecisionKind::Edit) payload["text"] = edited_text;
    store_.append(EventKind::OperatorDecision, std::move(payload), now());
}

Conversation EngagementEngine::apply_operator_decision(const std::string& conversation_id, const std::string& draft_id,
                                                       DecisionKind decision, const std::string& operator_id,
                                                       const std::string& edited_text) {
    if (operator_id.empty()) throw Error(ErrorCode::Unauthorized, "decision without operator id");
    std::lock_guard guard(lock_for(conversation_id));
    const auto c = conversation(conversation_id);
    if (c.state == SessionState::Terminated) throw Error(ErrorCode::SessionTerminated, conversation_id + " is terminated");

    std::optional<std::string> pending;
    bool draft_known = false;
    store_.read([&](const State& s) {
        pending = s.sessions.at(conversation_id).pending_draft_id;
        auto it = s.drafts.find(draft_id);
        draft_known = it != s.drafts.end() && it->second.draft.conversation_id == conversation_id;
    });

    if (decision == DecisionKind::Terminate) {
        if (!draft_id.empty() && pending && *pending == draft_id) {
            decide_locked(conversation_id, draft_id, decision, operator_id, {});
        } else {
            decide_locked(conversation_id, {}, decision, operator_id, {});
        }
        terminate_locked(conversation_id, OutcomeKind::OperatorTerminated);
        return conversation(conversation_id);
    }

    if (!pending) throw Error(ErrorCode::NotPendingApproval, conversation_id + " has no draft awaiting a decision");
    if (draft_id != *pending) {
        if (draft_known) throw Error(ErrorCode::StaleDraft, "draft " + draft_id + " is no longer pending");
        throw Error(ErrorCode::UnknownDraft, "unknown draft " + draft_id);
    }
    if (decision == DecisionKind::Edit && edited_text.empty())
        throw Error(ErrorCode::ValidationFailure, "an edit needs replacement text");

    DraftPurpose purpose = DraftPurpose::Reply;
    store_.read([&](const State& s) { purpose = s.drafts.at(draft_id).draft.purpose; });
    decide_locked(conversation_id, draft_id, decision, operator_id, edited_text);

    if (decision == DecisionKind::Approve || decision == DecisionKind::Edit) {
        dispatch_locked(conversation_id, draft_id);
        return conversation(conversation_id);
    }

    // Reject: draft again unless this conversation keeps getting rejected.
    int regenerations = 0;
    store_.read([&](const State& s) { regenerations = s.sessions.at(conversation_id).regenerations; });
    if (regenerations > policy_.regeneration_cap) {
        terminate_locked(conversation_id, OutcomeKind::OperatorTerminated);
    } else if (purpose == DraftPurpose::Opener) {
        queue_opener_locked(conversation_id);
    } else {
        try {
            respond_locked(conversation_id);
        } catch (const Error& e) {
            // Left in Drafting; the driver retries once the model is reachable again.
            if (e.code() != ErrorCode::LlmUnavailable) throw;
        }
    }
    return conversation(conversation_id);
}

void EngagementEngine::dispatch(const std::string& conversation_id, const std::string& draft_id) {
    std::lock_guard guard(lock_for(conversation_id));
    dispatch_locked(conversation_id, draft_id);
}

void EngagementEngine::dispatch_locked(const std::string& conversation_id, const std::string& draft_id) {
    DraftRecord record;
    Conversation c;
    store_.read([&](const State& s) {
        auto it = s.drafts.find(draft_id);
        if (it == s.drafts.end() || it->second.draft.conversation_id != conversation_id)
            throw Error(ErrorCode::UnknownDraft, "unknown draft " + draft_id);
        record = it->second;
        c = s.conversations.at(conversation_id);
    });
    if (record.decision != DecisionKind::Approve && record.decision != DecisionKind::Edit)
        throw Error(ErrorCode::UnapprovedSend, "draft " + draft_id + " has no Approve or Edit decision");
    if (record.sent) return;
    if (c.state == SessionState::Terminated) throw Error(ErrorCode::SessionTerminated, conversation_id + " is terminated");

    const auto outbound = std::count_if(c.messages.begin(), c.messages.end(),
                                        [](const ChatMessage& m) { return m.direction == Direction::Outbound; });
    OutboundMessage out{conversation_id, conversation_id + "/out" + std::to_string(outbound + 1), record.final_text};

    DeliveryReceipt receipt;
    try {
        receipt = transport_.send_message(c.actor, out);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Blocked) throw;
        bool heard_back = false;
        store_.read([&](const State& s) { heard_back = s.sessions.at(conversation_id).last_inbound_at.has_value(); });
        terminate_locked(conversation_id, heard_back ? OutcomeKind::Disengaged : OutcomeKind::NoResponse);
        return;
    }

    ChatMessage message;
    message.message_id = out.message_id;
    message.direction = Direction::Outbound;
    // Strictly increasing timestamps within a conversation, even when the clock has not moved.
    message.timestamp = c.messages.empty() ? receipt.sent_at : std::max(receipt.sent_at, c.messages.back().timestamp + 1);
    message.text = out.text;
    message.round_index = next_round_index(c, Direction::Outbound);
    store_.append(EventKind::MessageSent,
                  Json{{"conversation_id", conversation_id},
                       {"draft_id", draft_id},
                       {"message", message},
                       {"receipt", Json{{"message_id", receipt.message_id}, {"sent_at", receipt.sent_at}}}},
                  receipt.sent_at);
}

} // namespace honeywire
