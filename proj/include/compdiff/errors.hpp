#pragma once

#include <stdexcept>
#include <string>

namespace compdiff {

// Error categories map 1:1 onto CLI exit codes (1 usage, 2 I/O,
// 3 incompatibility, 4 numerical failure).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IncompatibilityError : std::runtime_error {
    explicit IncompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace compdiff
