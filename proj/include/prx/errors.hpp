#pragma once

#include <stdexcept>
#include <string>

namespace prx {

// Exit codes used by the CLI; exceptions map onto them 1:1.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  usage = 2,
  ingest = 3,
  numeric_domain = 4,
};

// Bad call: wrong dimensions, missing required argument, unknown config key.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad input file: non-numeric cell, blank line, missing column.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter outside its mathematical domain (non-positive scale, tau out of
// (0,1), mass outside [0,1]).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace prx
