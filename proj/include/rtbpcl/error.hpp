#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rtbpcl {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition (bad argument, empty batch, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// A NaN or infinity showed up where a finite value is required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Environment tables violate their structural invariants.
class MalformedEnvError : public Error {
public:
    using Error::Error;
};

// Configuration or fixture file is unreadable or fails validation.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::string field = {})
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    // Dotted path of the offending field, empty when not field-specific.
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace rtbpcl
