#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace honeywire {

enum class ErrorCode {
    EmptyHandle,
    BackendUnavailable,
    UnknownChannel,
    JoinRejected,
    NotJoined,
    Blocked,
    NotSimulated,
    LlmUnavailable,
    LlmRefusal,
    InvalidVerdict,
    AlreadyResolved,
    DuplicateSession,
    SessionTerminated,
    NotPendingApproval,
    UnapprovedSend,
    EngineUnavailable,
    NotAnImage,
    UnterminatedInput,
    EmptyInput,
    ValidationFailure,
    IoFailure,
    CorruptLog,
    UnknownDraft,
    StaleDraft,
    Unauthorized,
    UnknownConversation,
    UnknownEscalation,
    ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised by replay when the log has a gap, a torn line, or a checksum mismatch.
class CorruptLogError : public Error {
public:
    CorruptLogError(long long sequence, const std::string& what)
        : Error(ErrorCode::CorruptLog, "at sequence " + std::to_string(sequence) + ": " + what),
          sequence_(sequence) {}

    long long sequence() const noexcept { return sequence_; }

private:
    long long sequence_;
};

} // namespace honeywire
