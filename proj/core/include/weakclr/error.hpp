#pragma once

#include <stdexcept>
#include <string>

namespace weakclr {

// Every failure surfaced by the library carries a short machine-readable code
// (e.g. "shape_error", "checksum_error") next to the human message, so the CLI
// can emit it as JSON without parsing text.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define WEAKCLR_CHECK(cond, code, msg)                                  \
    do {                                                               \
        if (!(cond)) throw ::weakclr::Error((code), (msg));            \
    } while (0)

} // namespace weakclr
