#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spirit {

enum class ErrorCode {
  empty_reasoning,
  parse_error,
  duplicate_id,
  invalid_sample,
  io_error,
  backend_error,
  backend_inconsistency,
  empty_continuation,
  insufficient_tokens,
  script_miss,
  out_of_vocabulary,
  merge_rejected,
  invalid_input,
  config_error,
};

// Coarse categories used to pick process exit codes.
enum class ErrorKind { usage, backend, data };

std::string_view to_string(ErrorCode code);
ErrorKind kind_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_of(code_); }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);
  // 1-based line number in the source file, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class MergeRejectReason { answer_changed, bad_step_count, empty_reply, no_rule };

std::string_view to_string(MergeRejectReason reason);

class MergeRejected : public Error {
 public:
  MergeRejected(MergeRejectReason reason, const std::string& detail);
  MergeRejectReason reason() const noexcept { return reason_; }

 private:
  MergeRejectReason reason_;
};

}  // namespace spirit
