#include "xtl/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "xtl/errors.hpp"

namespace xtl {

std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("finite_diff_gradient: eps must be positive");
  }
  std::vector<double> grad(theta.size());
  std::vector<double> point = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    point[k] = theta[k] + eps;
    const double fp = f(point);
    point[k] = theta[k] - eps;
    const double fm = f(point);
    point[k] = theta[k];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_gradient: non-finite value at coordinate " +
                         std::to_string(k));
    }
    grad[k] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

}  // namespace xtl
