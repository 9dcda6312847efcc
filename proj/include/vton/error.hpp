#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vton {

/// Bad arguments: shape mismatches, out-of-range indices, malformed files.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inputs that are well-formed but carry no usable signal (e.g. a zero-length
/// removal direction).
class DegenerateInputError : public InputError {
public:
    using InputError::InputError;
};

struct FieldError {
    std::string field;
    std::string message;
};

/// Schema violation on a job spec; carries one entry per offending field.
class ValidationError : public InputError {
public:
    explicit ValidationError(std::vector<FieldError> errors)
        : InputError(summarize(errors)), errors_(std::move(errors)) {}

    ValidationError(std::string field, std::string message)
        : ValidationError(std::vector<FieldError>{FieldError{std::move(field), std::move(message)}}) {}

    const std::vector<FieldError>& errors() const noexcept { return errors_; }

private:
    static std::string summarize(const std::vector<FieldError>& errors) {
        std::string out = "validation failed";
        for (const auto& e : errors) {
            out += "; " + e.field + ": " + e.message;
        }
        return out;
    }

    std::vector<FieldError> errors_;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised from a step hook to abort a running denoising loop.
class CancelledError : public std::runtime_error {
public:
    CancelledError() : std::runtime_error("cancelled") {}
};

/// Backend failure inside a sampling loop, tagged with the step index.
class JobError : public std::runtime_error {
public:
    JobError(int step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace vton
