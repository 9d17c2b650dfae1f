#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lagdec {

/// Raised when tensor or layer shapes do not compose.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by routines that only support ReLU networks.
class UnsupportedActivation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an oracle instance exceeds its configured size cap.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace lagdec
