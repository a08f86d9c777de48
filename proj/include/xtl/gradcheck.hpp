#pragma once

#include <functional>
#include <vector>

namespace xtl {

/// Central-difference gradient of f at theta: (f(theta + eps*e_k) -
/// f(theta - eps*e_k)) / (2 eps) per coordinate. Throws NumericError naming
/// the coordinate if f returns a non-finite value, std::invalid_argument if
/// eps <= 0.
std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps);

}  // namespace xtl
