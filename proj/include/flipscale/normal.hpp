#pragma once

namespace flipscale {

// Standard normal distribution function.
double normal_cdf(double x);

// Standard normal density.
double normal_pdf(double x);

// Inverse of normal_cdf on (0, 1); Wichura's AS 241 (PPND16), relative
// accuracy about 1e-16. Returns -inf / +inf at 0 / 1 and throws
// InvalidArgument outside [0, 1].
double normal_quantile(double p);

}  // namespace flipscale
