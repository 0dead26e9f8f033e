#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sbl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a function is evaluated outside its numerical domain
/// (non-finite input or output, nonsmooth point of a derivative).
class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised on violated preconditions: dimension mismatches, invalid
/// configuration values.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when input text (CSV, iterate files, flags) cannot be parsed.
/// `line` and `column` are 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0,
             std::size_t column = 0)
      : std::runtime_error(format(what, line, column)),
        line_{line},
        column_{column} {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line,
                            std::size_t column) {
    if (line == 0) return what;
    std::string s = what + " (line " + std::to_string(line);
    if (column != 0) s += ", column " + std::to_string(column);
    return s + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractError(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace sbl
