#pragma once

#include <stdexcept>
#include <string>

namespace ehrpheno {

/// Bad input: malformed files, dangling references, out-of-range settings.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The completion backend failed: transport errors after retries, or an
/// error payload returned by the service.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& message, int status = 0)
        : std::runtime_error(message), status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

/// The prompt is larger than the backend's context budget. Callers are
/// expected to chunk before sending.
class ContextOverflowError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace ehrpheno
