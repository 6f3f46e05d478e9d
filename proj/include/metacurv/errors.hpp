#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace metacurv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lexical/syntactic failure; `pos` is a 0-based offset into the input text.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"), pos(pos) {}
  std::size_t pos;
};

// Evaluation hit a pole (division by zero, log of non-positive, sqrt of
// negative); carries the offending point.
struct PoleError : Error {
  PoleError(const std::string& msg, std::vector<double> at)
      : Error(msg), point(std::move(at)) {}
  std::vector<double> point;
};

struct ChartMismatchError : Error {
  using Error::Error;
};

// A documented operation precondition does not hold for the given input.
struct PreconditionError : Error {
  using Error::Error;
};

// Sampling-based checks could not find enough usable points.
struct DomainError : Error {
  using Error::Error;
};

}  // namespace metacurv
