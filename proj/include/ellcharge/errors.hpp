#pragma once

#include <stdexcept>
#include <string>

namespace ellcharge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The simulator produced a non-finite value.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& field, const std::string& detail)
        : Error("integration failure in field '" + field + "': " + detail), field_(field) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

/// CC-CV could not realise its voltage hold.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A point fell outside every partition rectangle.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Behaviors with inconsistent lengths or windows of the wrong size.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Enumeration guard exceeded.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Missing or inconsistent provenance / persisted data.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss or weights).
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Configuration rejected while parsing.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ellcharge
