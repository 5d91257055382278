#include "softplus_kernel.hpp"

#include <algorithm>
#include <cmath>

namespace esmeta::detail {

void softplus_inplace(double* z, double* slope, std::size_t n, double beta) {
  const double inv_beta = 1.0 / beta;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = z[i];
    // u = e^{-β|x|} lies in (0, 1], so ln(1 + u) keeps full absolute accuracy.
    const double u = std::exp(-beta * std::fabs(x));
    const double onep = 1.0 + u;
    const double r = 1.0 / onep;
    slope[i] = x >= 0.0 ? r : u * r;
    z[i] = std::max(x, 0.0) + std::log(onep) * inv_beta;
  }
}

}  // namespace esmeta::detail
