#pragma once

#include <stdexcept>
#include <string>

namespace ddcf {

// Shapes, layouts or counts that do not line up.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Operation undefined for the given value (e.g. evaluating a complex-valued spectrum as real).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigurationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// R is undefined because every initial position sits at the origin.
class DegenerateConfigurationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

// A frame of a sequence could not be obtained.
class SequenceError : public std::runtime_error {
  public:
    SequenceError(const std::string& what, std::size_t frame)
        : std::runtime_error("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}

    std::size_t frame() const noexcept { return frame_; }

  private:
    std::size_t frame_;
};

} // namespace ddcf
