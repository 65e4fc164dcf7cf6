#pragma once

#include <stdexcept>
#include <string>

namespace emoseq {

enum class ErrorKind {
  Usage,
  Io,
  Format,
  UnsupportedCodec,
  TooShort,
  Dimension,
  InvalidLabel,
  InfeasibleLabel,
  EmptyInput,
  Validation,
  Parse,
  Refused,
  Numeric,
};

// All library failures are reported as emoseq::Error; kind() drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// 1 = usage, 2 = data, 3 = numeric.
int exit_code(ErrorKind kind) noexcept;

}  // namespace emoseq
