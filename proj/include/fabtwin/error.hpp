#pragma once

#include <stdexcept>
#include <string>

namespace fabtwin {

/// Caller handed us something that violates an operation's preconditions.
/// The CLI maps every subclass of this to exit code 1.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

class InvalidConfig : public InvalidInput {
 public:
  explicit InvalidConfig(const std::string& what) : InvalidInput(what) {}
};

class InvalidSpec : public InvalidInput {
 public:
  explicit InvalidSpec(const std::string& what) : InvalidInput(what) {}
};

class UnsupportedFormat : public InvalidInput {
 public:
  explicit UnsupportedFormat(const std::string& what) : InvalidInput(what) {}
};

/// Failure during execution (I/O, divergence). Exit code 2 in the CLI.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fabtwin
