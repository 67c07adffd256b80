#pragma once

#include <stdexcept>
#include <string>

namespace gcrl {

// Raised when a caller breaks an operation's preconditions (bad dimensions,
// out-of-range actions, stepping a finished episode, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised when training produces non-finite losses or gradients. The harness
// catches this and aborts the run with a partial-output marker.
class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* what) {
  if (!condition) throw ContractViolation(what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace gcrl
