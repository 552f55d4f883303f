#pragma once

#include <functional>

#include "nimbus/tensor.hpp"

namespace nimbus {

/// Scalar function of one tensor. When `grad` is non-null the call must also
/// write d(output)/d(input) into it (same shape as the input).
using ScalarFn = std::function<double(const Tensor&, Tensor* grad)>;

/// Central finite-difference check of an analytic gradient.
/// Returns max over coordinates of
///   |analytic - central| / max(|analytic|, |central|, 1e-8).
/// Throws NumericError if any evaluation is non-finite.
double gradient_check(const ScalarFn& f, const Tensor& point, double epsilon);

}  // namespace nimbus
