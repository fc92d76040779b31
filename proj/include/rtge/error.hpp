#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rtge {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data (malformed dataset lines, bad years, unknown labels).
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public InputError {
public:
    ValidationError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyDomainError : public InputError {
public:
    using InputError::InputError;
};

class VocabularyError : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class CheckpointError : public InputError {
public:
    using InputError::InputError;
};

class CheckpointVersionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointDimensionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

// Relation negatives requested on a graph with a single relation.
class SamplerUnavailable : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(std::size_t iteration)
        : Error("objective became non-finite at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

}  // namespace rtge
