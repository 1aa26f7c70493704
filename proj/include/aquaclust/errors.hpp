#pragma once

#include <stdexcept>
#include <string>

namespace aquaclust {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A column, attribute, or category is missing or inconsistent with the schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Malformed input text (carries the offending row in the message).
class ParseError : public Error {
public:
    using Error::Error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data violates a runtime precondition (non-finite values, size mismatch).
class InputError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid pipeline or rules-file configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Wraps a failure with the pipeline stage it occurred in.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace aquaclust
