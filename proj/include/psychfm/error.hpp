#pragma once

#include <stdexcept>
#include <string>

namespace psychfm {

/// Input violates a documented precondition or type invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A CSV header is missing a required column.
class SchemaError : public ValidationError {
 public:
  explicit SchemaError(const std::string& column)
      : ValidationError("missing column: " + column), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// A data row could not be parsed.
class RowError : public ValidationError {
 public:
  RowError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A model or artifact file is malformed, truncated, or has the wrong header.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int epoch)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                           " (non-finite loss; lower the learning rate)"),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psychfm
