#pragma once

#include <stdexcept>
#include <string>

namespace hjbk {

/// Invalid user input: bad dimensions, malformed config, violated type invariants.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine produced an untrustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The synthesis pipeline (Riccati, SDP, extraction) could not produce a valid value function.
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-loop integration failed (state blow-up).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hjbk
