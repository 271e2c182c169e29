#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowpersp {

// Base for every error raised by the library. Callers that do not care about
// the category can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed FLOWLOG or scene-script text. line() is 1-based, 0 if unknown.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A value violates a type invariant (e.g. a vector outside the frame).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Frame indices are not strictly increasing.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied argument is outside its documented range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Projection of a point with non-positive camera depth.
class BehindCameraError : public Error {
 public:
  using Error::Error;
};

// An image row whose viewing ray does not meet the ground in front of the
// camera.
class HorizonError : public Error {
 public:
  using Error::Error;
};

// A scene script is inconsistent or produces an invalid trajectory.
class ScriptError : public Error {
 public:
  using Error::Error;
};

// Not enough usable observations to form an estimate.
class InsufficientDataError : public Error {
 public:
  InsufficientDataError(std::size_t available, const std::string& what)
      : Error(what + " (available: " + std::to_string(available) + ")"),
        available_(available) {}
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t available_;
};

// A least-squares system with no information about the unknown.
class DegenerateSystemError : public Error {
 public:
  using Error::Error;
};

// The scale factor left its admissible domain (omega <= 0).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// An iterative solver ran out of iterations.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(double last_iterate, const std::string& what)
      : Error(what + " (last iterate: " + std::to_string(last_iterate) + ")"),
        last_iterate_(last_iterate) {}
  double last_iterate() const noexcept { return last_iterate_; }

 private:
  double last_iterate_;
};

}  // namespace flowpersp
