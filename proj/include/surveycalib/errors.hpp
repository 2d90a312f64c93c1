#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace surveycalib {

/// Raised when a linear-algebra step cannot be carried out reliably
/// (singular Gram matrix, vanishing retained eigenvalue, non-convergence).
/// `condition()` carries the condition estimate or residual norm when one
/// is available, NaN otherwise.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what,
                          double condition = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// A configuration document failed validation. Holds every violation found.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace surveycalib
