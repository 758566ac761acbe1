#pragma once

#include <stdexcept>
#include <string>

namespace oar {

/// Exit-code class of an error. Values are the process exit codes used by the CLI.
enum class ErrorKind : int {
    validation = 1,
    io = 2,
    computation = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string category, const std::string& message)
        : std::runtime_error(message), kind_(kind), category_(std::move(category)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Short machine-readable tag, e.g. "format" or "geometry".
    const std::string& category() const noexcept { return category_; }

private:
    ErrorKind kind_;
    std::string category_;
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::io, "io", msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg, std::string category = "format")
        : Error(ErrorKind::io, std::move(category), msg) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg, std::string category = "validation")
        : Error(ErrorKind::validation, std::move(category), msg) {}
};

struct GeometryError : Error {
    explicit GeometryError(const std::string& msg, std::string category = "geometry")
        : Error(ErrorKind::computation, std::move(category), msg) {}
};

struct ComputationError : Error {
    explicit ComputationError(const std::string& msg, std::string category = "computation")
        : Error(ErrorKind::computation, std::move(category), msg) {}
};

}  // namespace oar
