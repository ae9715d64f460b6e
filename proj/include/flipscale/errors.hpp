#pragma once

#include <stdexcept>
#include <string>

namespace flipscale {

// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,     // bad sizes, out-of-domain parameters, malformed input
  kToleranceNotReached, // an iteration hit its depth cap
  kNoFlip,              // the function never switches from 0 to 1
  kUnsupported,         // e.g. a family without a stated limit law
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

class NoFlip : public Error {
 public:
  explicit NoFlip(const std::string& what) : Error(ErrorKind::kNoFlip, what) {}
};

class Unsupported : public Error {
 public:
  explicit Unsupported(const std::string& what)
      : Error(ErrorKind::kUnsupported, what) {}
};

// Carries the best value reached before the depth cap.
class ToleranceNotReached : public Error {
 public:
  ToleranceNotReached(const std::string& what, double best_value)
      : Error(ErrorKind::kToleranceNotReached, what), best_value_(best_value) {}

  double best_value() const noexcept { return best_value_; }

 private:
  double best_value_;
};

}  // namespace flipscale
