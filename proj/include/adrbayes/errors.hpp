#pragma once

#include <stdexcept>
#include <string>

namespace adrb {

// Invalid arguments are reported with std::invalid_argument throughout.

/// A value left its mathematical domain (overflowed intensity, non-finite state).
class NumericDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent input data (files, records, shapes read from disk).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The sampler could not start from a finite log-posterior.
class InitializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A sampler block produced a non-finite state mid-run.
class IterationError : public std::runtime_error {
public:
    IterationError(const std::string& block, long iteration, const std::string& what)
        : std::runtime_error("block '" + block + "' at iteration " + std::to_string(iteration) +
                             ": " + what),
          block_(block),
          iteration_(iteration) {}

    const std::string& block() const noexcept { return block_; }
    long iteration() const noexcept { return iteration_; }

private:
    std::string block_;
    long iteration_;
};

}  // namespace adrb
