#include "emoseq/error.hpp"

namespace emoseq {

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::UnsupportedCodec: return "unsupported codec";
    case ErrorKind::TooShort: return "input too short";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::InvalidLabel: return "invalid label";
    case ErrorKind::InfeasibleLabel: return "infeasible label";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Refused: return "refused";
    case ErrorKind::Numeric: return "numeric error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
      return 1;
    case ErrorKind::Numeric:
    case ErrorKind::InfeasibleLabel:
      return 3;
    default:
      return 2;
  }
}

}  // namespace emoseq
