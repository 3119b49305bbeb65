#pragma once

#include <stdexcept>
#include <string>

namespace lores {

// Typed runtime error. `code()` is a stable machine-parsable class name
// (e.g. "LineCountMismatch"); what() carries "<code>: <human detail>".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& detail) {
    throw Error(std::move(code), detail);
}

}  // namespace lores
