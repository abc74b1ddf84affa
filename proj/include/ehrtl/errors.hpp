#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ehrtl {

/// Unreadable or unwritable input/output (missing file, permission, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed content at a known line of a file.
class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unknown patient or test.
class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ehrtl
