#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace defect_cascade {

// Input outside the physical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Integration or linear-algebra failure.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Run configuration rejected; carries every violation found.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& i : v) {
      if (!s.empty()) s += "; ";
      s += i;
    }
    return s;
  }
  std::vector<std::string> issues_;
};

}  // namespace defect_cascade
