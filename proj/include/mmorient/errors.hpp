#pragma once

#include <stdexcept>
#include <string>

namespace mmorient {

/// Malformed or inconsistent input data (files, manifests, lexicons).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not chain (config vs. bundle vs. snapshot).
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced NaN/Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mmorient
