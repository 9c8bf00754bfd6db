#pragma once

#include <stdexcept>
#include <string>

namespace spikedet {

// Exit codes used by the CLI: 0 ok, 1 usage, 2 data, 3 protocol.
enum class ExitCode : int {
  ok = 0,
  usage = 1,
  data = 2,
  protocol = 3,
};

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files, out-of-range values, missing paths.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure that can name its location in the offending file.
struct ParseError : DataError {
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : DataError(file + ":" + std::to_string(line) + ": " + msg),
        file_name(file),
        line_number(line) {}
  std::string file_name;
  std::size_t line_number;
};

// Violation of an experiment protocol contract (e.g. a router mutating on an
// evaluation sequence). Hard failure, never a warning.
struct ProtocolViolation : std::runtime_error {
  explicit ProtocolViolation(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spikedet
