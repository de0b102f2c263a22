// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace attnvar {

/// All numeric state is double precision. Row-major storage so that
/// serialized buffers enumerate values row by row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_str(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// Thrown when operand shapes are incompatible for an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

[[noreturn]] inline void throw_shape_error(const char* op, const Mat& a, const Mat& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] inline void throw_shape_error(const char* op, const Mat& a) {
    throw ShapeError(std::string(op) + ": invalid shape " + shape_str(a));
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

} // namespace attnvar
