#ifndef SELBIAS_ERROR_HPP_
#define SELBIAS_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace selbias {

enum class ErrorCode {
  InvalidArgument = 1,
  UnknownNode,
  Format,
  Io,
  Degenerate,
  Cyclic,
  RetryExhausted,
  Usage,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::UnknownNode: return "unknown_node";
    case ErrorCode::Format: return "format";
    case ErrorCode::Io: return "io";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::Cyclic: return "cyclic";
    case ErrorCode::RetryExhausted: return "retry_exhausted";
    case ErrorCode::Usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace selbias

#endif  // SELBIAS_ERROR_HPP_
