#pragma once

#include <stdexcept>
#include <string>

namespace ecn {

// Validation failure surfaced to callers (CLI maps it to exit code 1).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

[[noreturn]] inline void fail(const std::string& msg) {
    throw Error(msg);
}

} // namespace ecn
