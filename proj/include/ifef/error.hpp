#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifef {

/// Invalid configuration, shape mismatch, or malformed input.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A non-finite value appeared during evaluation. `index` is the offending
/// collocation point (or epoch, depending on the raising site); -1 if unknown.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, long index = -1)
        : std::runtime_error(what), index_(index) {}
    long index() const noexcept { return index_; }

private:
    long index_;
};

/// Cholesky factorization of Q + gamma*I failed.
class SingularSystemError : public NumericError {
public:
    SingularSystemError(const std::string& what, double smallest_pivot)
        : NumericError(what), smallest_pivot_(smallest_pivot) {}
    double smallest_pivot() const noexcept { return smallest_pivot_; }

private:
    double smallest_pivot_;
};

/// Iterative solver blew up; carries the loss trace up to the failure.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::vector<double> trace)
        : NumericError(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// Metric is undefined for the given inputs (e.g. zero reference norm).
class MetricError : public std::runtime_error {
public:
    explicit MetricError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ifef
