#pragma once

#include <stdexcept>
#include <string>

namespace sfe {

/// Failure classes. The numeric values double as CLI exit statuses.
enum class ErrorKind : int {
    Parse = 2,
    Validation = 3,
    Channel = 4,
    Numerical = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_status() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error parse_error(const std::string& what) { return {ErrorKind::Parse, what}; }
inline Error validation_error(const std::string& what) { return {ErrorKind::Validation, what}; }
inline Error channel_error(const std::string& what) { return {ErrorKind::Channel, what}; }
inline Error numerical_error(const std::string& what) { return {ErrorKind::Numerical, what}; }

}  // namespace sfe
