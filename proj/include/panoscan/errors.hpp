#pragma once

#include <stdexcept>
#include <string>

namespace panoscan {

// Shape/precondition violations inside numeric kernels.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Bad user-facing arguments (CLI flags, config values, op parameters).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Config file problems (unknown key, unparsable value). CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing/corrupt datasets, manifests, checkpoints. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered during training. CLI exit code 4.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace panoscan
