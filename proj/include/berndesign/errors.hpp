#pragma once

#include <stdexcept>
#include <string>

namespace berndesign {

/// Thrown when an operation's precondition is violated (bad sizes, parity,
/// non-finite input, ...). The message names the violated rule.
class precondition_error : public std::invalid_argument {
public:
    explicit precondition_error(const std::string& what)
        : std::invalid_argument(what) {}
};

/// Thrown on file read/write failures.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw precondition_error(message);
}

}  // namespace berndesign
