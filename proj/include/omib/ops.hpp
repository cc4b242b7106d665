#pragma once

#include <span>
#include <vector>

#include "omib/tensor.hpp"

namespace omib {

// Differentiable primitives. Every op checks shapes (ShapeError naming the op
// and operand shapes) and finiteness of its output (NumericError).
//
// Axes: for rank-2 tensors axis 0 runs over rows and axis 1 over columns. A
// rank-1 tensor has the single axis 0. Reductions keep rank-2 shapes
// ([r x 1] / [1 x c]); reducing a rank-1 tensor yields a scalar.

Tensor matmul(const Tensor& a, const Tensor& b);
/// x [n x in] * w [in x out] + bias [out] broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Elementwise with broadcasting: each matrix dimension must match or be 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor broadcast_to(const Tensor& x, const Shape& shape);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor square(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor concat(std::initializer_list<Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);
/// Rows of x selected (and possibly repeated) by index.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
/// out[i] = x[i, index[i]]; rank-1 result of length rows(x).
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
/// tanh approximation 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
/// Natural log with the input clamped at 1e-12.
Tensor log(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);

Tensor sum(const Tensor& x, int axis);
Tensor mean(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

constexpr double kLogClamp = 1e-12;

}  // namespace omib
