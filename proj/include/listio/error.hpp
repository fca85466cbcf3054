#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace listio {

enum class ErrorCode : std::uint8_t {
    plan_invalid,
    protocol,
    not_found,
    exists,
    io,
    spec,
    invalid_argument,
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::plan_invalid: return "plan-invalid";
        case ErrorCode::protocol: return "protocol";
        case ErrorCode::not_found: return "not-found";
        case ErrorCode::exists: return "exists";
        case ErrorCode::io: return "io";
        case ErrorCode::spec: return "spec";
        case ErrorCode::invalid_argument: return "invalid-argument";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace listio
