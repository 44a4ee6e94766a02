#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tlcqm {

/// Violated precondition on an argument (shape, range, finiteness).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A required column is missing or files disagree on their columns.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& column, const std::string& detail = {})
      : std::runtime_error("schema error: column '" + column + "'" +
                           (detail.empty() ? std::string(" not found") : ": " + detail)),
        column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// A cell could not be parsed as a finite number. Rows are 1-based data rows
/// (the header is not counted).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& column, const std::string& cell)
      : std::runtime_error("parse error at row " + std::to_string(row) + ", column '" +
                           column + "': cannot parse '" + cell + "' as a number"),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class EmptyInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss during gradient training.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int epoch, double learning_rate)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                           " (learning rate " + std::to_string(learning_rate) + ")"),
        epoch_(epoch),
        learning_rate_(learning_rate) {}
  int epoch() const noexcept { return epoch_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  int epoch_;
  double learning_rate_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised by the augmentation pipeline, labelled with the failing step.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(const std::string& step, const std::string& detail)
      : std::runtime_error(step + ": " + detail), step_(step) {}
  const std::string& step() const noexcept { return step_; }

 private:
  std::string step_;
};

}  // namespace tlcqm
