#include "spirit/errors.hpp"

namespace spirit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::empty_reasoning: return "EmptyReasoning";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::duplicate_id: return "DuplicateId";
    case ErrorCode::invalid_sample: return "InvalidSample";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::backend_error: return "BackendError";
    case ErrorCode::backend_inconsistency: return "BackendInconsistency";
    case ErrorCode::empty_continuation: return "EmptyContinuation";
    case ErrorCode::insufficient_tokens: return "InsufficientTokens";
    case ErrorCode::script_miss: return "ScriptMiss";
    case ErrorCode::out_of_vocabulary: return "OutOfVocabulary";
    case ErrorCode::merge_rejected: return "MergeRejected";
    case ErrorCode::invalid_input: return "InvalidInput";
    case ErrorCode::config_error: return "ConfigError";
  }
  return "Unknown";
}

ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::backend_error:
    case ErrorCode::backend_inconsistency:
    case ErrorCode::script_miss:
      return ErrorKind::backend;
    case ErrorCode::config_error:
      return ErrorKind::usage;
    default:
      return ErrorKind::data;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorCode::parse_error,
            line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

std::string_view to_string(MergeRejectReason reason) {
  switch (reason) {
    case MergeRejectReason::answer_changed: return "answer_changed";
    case MergeRejectReason::bad_step_count: return "bad_step_count";
    case MergeRejectReason::empty_reply: return "empty_reply";
    case MergeRejectReason::no_rule: return "no_rule";
  }
  return "unknown";
}

MergeRejected::MergeRejected(MergeRejectReason reason, const std::string& detail)
    : Error(ErrorCode::merge_rejected,
            std::string(to_string(reason)) + (detail.empty() ? "" : " (" + detail + ")")),
      reason_(reason) {}

}  // namespace spirit
