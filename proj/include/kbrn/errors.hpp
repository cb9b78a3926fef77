#pragma once

#include <stdexcept>
#include <string>

namespace kbrn {

// Fatal dimension mismatch; the message names both shapes involved.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required (NaN gradients, divergence).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kbrn
