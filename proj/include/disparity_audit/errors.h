#ifndef DISPARITY_AUDIT_ERRORS_H_
#define DISPARITY_AUDIT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace disparity_audit {

// Invalid or inconsistent run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data or violated data preconditions. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal invariant did not hold. CLI exit code 4.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_ERRORS_H_
