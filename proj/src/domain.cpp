#include "honeywire/domain.hpp"

#include "honeywire/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

namespace honeywire {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyHandle: return "EmptyHandle";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::JoinRejected: return "JoinRejected";
    case ErrorCode::NotJoined: return "NotJoined";
    case ErrorCode::Blocked: return "Blocked";
    case ErrorCode::NotSimulated: return "NotSimulated";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::LlmRefusal: return "LlmRefusal";
    case ErrorCode::InvalidVerdict: return "InvalidVerdict";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::DuplicateSession: return "DuplicateSession";
    case ErrorCode::SessionTerminated: return "SessionTerminated";
    case ErrorCode::NotPendingApproval: return "NotPendingApproval";
    case ErrorCode::UnapprovedSend: return "UnapprovedSend";
    case ErrorCode::EngineUnavailable: return "EngineUnavailable";
    case ErrorCode::NotAnImage: return "NotAnImage";
    case ErrorCode::UnterminatedInput: return "UnterminatedInput";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::UnknownDraft: return "UnknownDraft";
    case ErrorCode::StaleDraft: return "StaleDraft";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::UnknownConversation: return "UnknownConversation";
    case ErrorCode::UnknownEscalation: return "UnknownEscalation";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

ChannelHandle canonicalize_handle(std::string_view raw) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t begin = 0;
    std::size_t end = raw.size();
    while (begin < end && is_space(static_cast<unsigned char>(raw[begin]))) ++begin;
    while (end > begin && is_space(static_cast<unsigned char>(raw[end - 1]))) --end;
    std::string_view trimmed = raw.substr(begin, end - begin);
    while (!trimmed.empty() && trimmed.front() == '@') trimmed.remove_prefix(1);
    if (trimmed.empty()) throw Error(ErrorCode::EmptyHandle, "handle '" + std::string(raw) + "' is blank");

    std::string canonical;
    canonical.reserve(trimmed.size());
    for (unsigned char c : trimmed) {
        if (is_space(c)) throw Error(ErrorCode::EmptyHandle, "handle '" + std::string(raw) + "' contains whitespace");
        canonical.push_back(static_cast<char>(std::tolower(c)));
    }
    return ChannelHandle{std::string(raw), std::move(canonical)};
}

bool is_legal_transition(SessionState from, SessionState to) {
    using S = SessionState;
    if (from == S::Terminated) return false;
    if (to == S::Terminated) return true;
    switch (from) {
    case S::Idle: return to == S::ContactSent;
    case S::ContactSent: return to == S::AwaitingReply;
    case S::AwaitingReply: return to == S::Drafting;
    // Refusal retries stay in Drafting.
    case S::Drafting: return to == S::PendingApproval || to == S::Drafting;
    // Approved send, or Reject re-entering Drafting.
    case S::PendingApproval: return to == S::AwaitingReply || to == S::Drafting;
    case S::Terminated: return false;
    }
    return false;
}

int count_rounds(const std::vector<ChatMessage>& messages) {
    int rounds = 0;
    bool outbound_open = false;
    for (const auto& m : messages) {
        if (m.direction == Direction::Outbound) {
            outbound_open = true;
        } else if (outbound_open) {
            ++rounds;
            outbound_open = false;
        }
    }
    return rounds;
}

bool carrier_consistent(PaymentMethod method, Carrier carrier) {
    if (method == PaymentMethod::AlipayImage || method == PaymentMethod::QQImage) return carrier == Carrier::Image;
    return true;
}

std::vector<std::string> validate_conversation(const Conversation& c) {
    std::vector<std::string> violations;
    const bool terminated = c.state == SessionState::Terminated;
    if (terminated != c.outcome.has_value()) violations.emplace_back("outcome-state mismatch");

    for (std::size_t i = 1; i < c.messages.size(); ++i) {
        if (c.messages[i].timestamp <= c.messages[i - 1].timestamp) {
            violations.emplace_back("ordering violated");
            break;
        }
    }
    if (count_rounds(c.messages) != c.round_counter) violations.emplace_back("round counter mismatch");
    if (c.retry_counter < 0 || c.retry_counter > 3) violations.emplace_back("retry counter out of range");

    std::set<std::string> media_ids;
    bool duplicate_media = false;
    for (const auto& m : c.messages) {
        if (m.text.empty() && m.media.empty()) {
            violations.emplace_back("empty message");
            break;
        }
    }
    for (const auto& m : c.messages) {
        if (m.ocr_text && m.media.empty()) {
            violations.emplace_back("ocr without media");
            break;
        }
    }
    for (const auto& m : c.messages) {
        for (const auto& media : m.media) {
            if (!media_ids.insert(media.media_id).second) duplicate_media = true;
        }
    }
    if (duplicate_media) violations.emplace_back("duplicate media id");

    if (c.outcome) {
        const bool paid = c.outcome->kind == OutcomeKind::PaymentObtained;
        if (paid == c.outcome->evidence.empty()) violations.emplace_back("outcome evidence mismatch");
        for (const auto& d : c.outcome->evidence) {
            if (!carrier_consistent(d.method, d.carrier)) {
                violations.emplace_back("carrier inconsistent with method");
                break;
            }
        }
    }
    return violations;
}

namespace {

template <typename Enum, std::size_t N>
using NameTable = std::array<std::pair<Enum, std::string_view>, N>;

constexpr NameTable<Direction, 2> kDirection{{{Direction::Inbound, "Inbound"}, {Direction::Outbound, "Outbound"}}};
constexpr NameTable<MediaKind, 2> kMediaKind{{{MediaKind::Image, "Image"}, {MediaKind::Other, "Other"}}};
constexpr NameTable<SourceKind, 3> kSourceKind{{{SourceKind::DirectoryQuery, "DirectoryQuery"},
                                                {SourceKind::CrossLink, "CrossLink"},
                                                {SourceKind::SeedConfig, "SeedConfig"}}};
constexpr NameTable<Decision, 4> kDecision{{{Decision::Relevant, "Relevant"},
                                            {Decision::Irrelevant, "Irrelevant"},
                                            {Decision::Refusal, "Refusal"},
                                            {Decision::Borderline, "Borderline"}}};
constexpr NameTable<Judge, 2> kJudge{{{Judge::Model, "Model"}, {Judge::Human, "Human"}}};
constexpr NameTable<Classification, 3> kClassification{{{Classification::Individual, "Individual"},
                                                        {Classification::Platform, "Platform"},
                                                        {Classification::Unknown, "Unknown"}}};
constexpr NameTable<SessionState, 6> kSessionState{{{SessionState::Idle, "Idle"},
                                                    {SessionState::ContactSent, "ContactSent"},
                                                    {SessionState::AwaitingReply, "AwaitingReply"},
                                                    {SessionState::Drafting, "Drafting"},
                                                    {SessionState::PendingApproval, "PendingApproval"},
                                                    {SessionState::Terminated, "Terminated"}}};
constexpr NameTable<PaymentMethod, 7> kPaymentMethod{{{PaymentMethod::Alipay, "Alipay"},
                                                      {PaymentMethod::AlipayImage, "AlipayImage"},
                                                      {PaymentMethod::WeChat, "WeChat"},
                                                      {PaymentMethod::USDT, "USDT"},
                                                      {PaymentMethod::QQImage, "QQImage"},
                                                      {PaymentMethod::Bank, "Bank"},
                                                      {PaymentMethod::PaymentSolution, "PaymentSolution"}}};
constexpr NameTable<Carrier, 2> kCarrier{{{Carrier::Text, "Text"}, {Carrier::Image, "Image"}}};
constexpr NameTable<OutcomeKind, 5> kOutcomeKind{{{OutcomeKind::PaymentObtained, "PaymentObtained"},
                                                  {OutcomeKind::NoResponse, "NoResponse"},
                                                  {OutcomeKind::Disengaged, "Disengaged"},
                                                  {OutcomeKind::LlmFailure, "LlmFailure"},
                                                  {OutcomeKind::OperatorTerminated, "OperatorTerminated"}}};

template <typename Enum, std::size_t N>
std::string_view lookup_name(const NameTable<Enum, N>& table, Enum value) {
    for (const auto& [v, name] : table)
        if (v == value) return name;
    return "?";
}

template <typename Enum, std::size_t N>
Enum lookup_value(const NameTable<Enum, N>& table, std::string_view name) {
    for (const auto& [v, n] : table)
        if (n == name) return v;
    throw Error(ErrorCode::ValidationFailure, "unknown enum name '" + std::string(name) + "'");
}

} // namespace

std::string_view to_string(Direction v) { return lookup_name(kDirection, v); }
std::string_view to_string(MediaKind v) { return lookup_name(kMediaKind, v); }
std::string_view to_string(SourceKind v) { return lookup_name(kSourceKind, v); }
std::string_view to_string(Decision v) { return lookup_name(kDecision, v); }
std::string_view to_string(Judge v) { return lookup_name(kJudge, v); }
std::string_view to_string(Classification v) { return lookup_name(kClassification, v); }
std::string_view to_string(SessionState v) { return lookup_name(kSessionState, v); }
std::string_view to_string(PaymentMethod v) { return lookup_name(kPaymentMethod, v); }
std::string_view to_string(Carrier v) { return lookup_name(kCarrier, v); }
std::string_view to_string(OutcomeKind v) { return lookup_name(kOutcomeKind, v); }

template <> Direction enum_from_string<Direction>(std::string_view n) { return lookup_value(kDirection, n); }
template <> MediaKind enum_from_string<MediaKind>(std::string_view n) { return lookup_value(kMediaKind, n); }
template <> SourceKind enum_from_string<SourceKind>(std::string_view n) { return lookup_value(kSourceKind, n); }
template <> Decision enum_from_string<Decision>(std::string_view n) { return lookup_value(kDecision, n); }
template <> Judge enum_from_string<Judge>(std::string_view n) { return lookup_value(kJudge, n); }
template <> Classification enum_from_string<Classification>(std::string_view n) {
    return lookup_value(kClassification, n);
}
template <> SessionState enum_from_string<SessionState>(std::string_view n) { return lookup_value(kSessionState, n); }
template <> PaymentMethod enum_from_string<PaymentMethod>(std::string_view n) {
    return lookup_value(kPaymentMethod, n);
}
template <> Carrier enum_from_string<Carrier>(std::string_view n) { return lookup_value(kCarrier, n); }
template <> OutcomeKind enum_from_string<OutcomeKind>(std::string_view n) { return lookup_value(kOutcomeKind, n); }

} // namespace honeywire
