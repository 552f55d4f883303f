#include "nimbus/gradcheck.hpp"

#include <cmath>

namespace nimbus {

double gradient_check(const ScalarFn& f, const Tensor& point, double epsilon) {
  NIMBUS_CHECK(epsilon > 0.0, "gradient_check: epsilon must be positive");
  Tensor analytic(point.shape());
  const double f0 = f(point, &analytic);
  if (!std::isfinite(f0) || !analytic.all_finite())
    throw NumericError("gradient_check: non-finite evaluation at the base point");

  Tensor x = point;
  double worst = 0.0;
  for (std::int64_t i = 0; i < point.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double fp = f(x, nullptr);
    x[i] = saved - epsilon;
    const double fm = f(x, nullptr);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("gradient_check: non-finite evaluation at a perturbed point");
    const double central = (fp - fm) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(central), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - central) / denom);
  }
  return worst;
}

}  // namespace nimbus
