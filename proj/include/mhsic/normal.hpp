#pragma once

namespace mhsic {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile for p in (0, 1). Acklam's rational approximation
/// refined by one Halley step against the erfc-based CDF.
double normal_quantile(double p);

}  // namespace mhsic
