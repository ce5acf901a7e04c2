#pragma once

#include <cmath>

namespace cntco {

template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(-x / Scalar(M_SQRT2));
}

template <typename Scalar>
Scalar normal_pdf(Scalar x) {
  using std::exp;
  return exp(Scalar(-0.5) * x * x) / Scalar(2.5066282746310002);
}

// Inverse standard normal CDF (Wichura, AS241, ~1e-16 relative).
double normal_quantile(double p);

}  // namespace cntco
