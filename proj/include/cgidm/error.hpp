// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cgidm {

enum class ErrorCode {
    invalid_argument = 1,
    shape_mismatch = 2,
    numerical = 3,
    io = 4,
    format = 5,
    config = 6,
    missing_artifact = 7,
    hash_mismatch = 8,
};

/// Every failure raised by the library carries one of the codes above so the
/// C boundary can translate it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) {
        throw Error(code, message);
    }
}

}  // namespace cgidm
