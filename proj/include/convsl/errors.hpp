#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument: index out of range, mismatched grids, bad truncation.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Successive approximations did not reach the requested tolerance.
class IterationFailure : public Error {
public:
    IterationFailure(const std::string& what, double last_increment)
        : Error(what + " (last increment " + std::to_string(last_increment) + ")"),
          last_increment_(last_increment) {}

    [[nodiscard]] double last_increment() const noexcept { return last_increment_; }

private:
    double last_increment_;
};

/// Newton iteration for the n-th eigenvalue diverged or collided with another root.
class RootLocalizationError : public Error {
public:
    RootLocalizationError(const std::string& what, std::size_t index)
        : Error(what + " (eigenvalue index " + std::to_string(index) + ")"), index_(index) {}

    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// The local fixed-point map stopped contracting on the current interval.
class NonContraction : public Error {
public:
    using Error::Error;
};

/// Input data cannot belong to any (q, M) pair (mean-value condition violated).
class InconsistentDataError : public Error {
public:
    using Error::Error;
};

/// Generic numerical breakdown, tagged with the pipeline stage that failed.
class SolverError : public Error {
public:
    SolverError(const std::string& stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(stage) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace convsl
