#pragma once

#include <stdexcept>
#include <string>

namespace rdgm {

/// Bad configuration or input that violates a declared contract.
/// The CLI maps this to exit status 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while computing on otherwise valid inputs (exit status 4).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rdgm
