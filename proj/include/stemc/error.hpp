#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stemc {

/// Failure categories. The CLI prints the category name as the first token of
/// its one-line error message so scripts can dispatch on it.
enum class ErrorKind {
  Io,
  Format,
  Version,
  Shape,
  Graph,
  Range,
  Config,
  Capacity,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Version: return "version";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Graph: return "graph";
    case ErrorKind::Range: return "range";
    case ErrorKind::Config: return "config";
    case ErrorKind::Capacity: return "capacity";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stemc
