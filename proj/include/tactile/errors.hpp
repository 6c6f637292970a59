#pragma once

#include <stdexcept>
#include <string>

namespace tactile {

// Bad argument values (non-positive sizes, empty meshes, malformed ids).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation's precondition, e.g. stepping a finished episode.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReconstructionFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistrationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint or config digest does not match what the caller expects.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tactile
