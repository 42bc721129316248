#pragma once

#include <stdexcept>
#include <string>

namespace amlgraph {

/// Malformed input file content. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Inputs that parse but do not form a consistent dataset or graph.
class StructuralError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values or divergence during training.
class TrainingError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Exception = ArgumentError>
inline void require(bool cond, const char* msg) {
  if (!cond) throw Exception(msg);
}

template <class Exception = ArgumentError>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Exception(msg);
}

}  // namespace amlgraph
