#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fbmch {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A quadrature or factorization that did not reach its tolerance.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Non-finite or overflowing state during time stepping.
class BlowUpError : public std::runtime_error {
public:
    explicit BlowUpError(std::size_t step)
        : std::runtime_error("solution blew up at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void warn(const std::string& message);

}  // namespace fbmch
