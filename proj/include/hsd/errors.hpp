#pragma once

#include <stdexcept>
#include <string>

namespace hsd {

// User-facing failures (bad input, bad config, bad files). The CLI maps
// these to exit code 1; anything else is an internal error (exit 2).
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : UserError {
  using UserError::UserError;
};

struct ConfigError : UserError {
  using UserError::UserError;
};

// Raised when a corpus file's labels do not match the active label schema.
struct SchemaMismatchError : UserError {
  using UserError::UserError;
};

struct DegenerateSplitError : UserError {
  using UserError::UserError;
};

// Agreement computation has no pairable item.
struct InsufficientDataError : UserError {
  using UserError::UserError;
};

// Expected disagreement is zero (single category observed); alpha undefined.
struct UndefinedAlphaError : UserError {
  using UserError::UserError;
};

struct UsageError : UserError {
  using UserError::UserError;
};

// Non-finite value met where a finite one is required (diverged training,
// corrupt gradient). Carries enough context to identify the tensor.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hsd
