#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfresnet {

/// Violated precondition (shape mismatch, empty input, out-of-range argument).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared during evaluation or training.
class NumericOverflow : public std::runtime_error {
 public:
  NumericOverflow(const std::string& what, int index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

  /// Layer index for forward/adjoint failures, step index for training failures.
  int index() const noexcept { return index_; }

 private:
  int index_;
};

/// Input data breaks the unit-norm / non-parallel data assumption.
class AssumptionViolation : public std::domain_error {
 public:
  AssumptionViolation(const std::string& what, int i, int j)
      : std::domain_error(what), i_(i), j_(j) {}
  int first() const noexcept { return i_; }
  int second() const noexcept { return j_; }

 private:
  int i_;
  int j_;
};

/// No usable nonzero Hermite coefficient was found for an activation.
class DegenerateActivation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; carries every offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> keys)
      : std::runtime_error(join(keys)), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const noexcept { return keys_; }

 private:
  static std::string join(const std::vector<std::string>& keys) {
    std::string out = "invalid config keys:";
    for (const auto& k : keys) out += " " + k;
    return out;
  }
  std::vector<std::string> keys_;
};

#define MFRESNET_REQUIRE(cond, msg)                      \
  do {                                                   \
    if (!(cond)) throw ::mfresnet::ContractViolation(msg); \
  } while (0)

}  // namespace mfresnet
