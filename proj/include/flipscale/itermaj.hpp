#pragma once

// Analytic side of iterated m-majority.
//
// g(x) is the probability that majority of m independent Bernoulli(x) bits
// is one, h(x) = g(1/2 + x) - 1/2 its centered form on [-1/2, 1/2], and
// gamma(m) = h'(0). The rescaled flip time gamma^n (T_n - 1/2) converges to
// the law F_m(x) = 1/2 + L(x) with L(alpha) = lim_n h^(n)(alpha gamma^-n).
//
// Near the fixed point 1/2 values are tracked as eps = 1/2 - x, using
// 1/2 - h(1/2 - eps) = g(eps), and eps itself is kept as log(eps) so that
// tails far below the double range stay representable.

#include <vector>

namespace flipscale::itermaj {

struct Params {
  int m = 3;
  double tol = 1e-12;
  int max_depth = 200;

  // Throws InvalidArgument unless m is odd, m >= 3, tol in (0, 1e-3) and
  // max_depth >= 1.
  void validate() const;
};

// g, h and their derivatives for one arity m.
class MajorityMap {
 public:
  explicit MajorityMap(int m);

  int m() const noexcept { return m_; }
  double gamma() const noexcept { return gamma_; }

  // Throws InvalidArgument outside [0, 1].
  double g(double x) const;
  // log g(x) given log x, for x in (0, 1/2]. Accurate when x underflows.
  double log_g_small(double log_x) const;
  double g_prime(double x) const;

  // Odd; accurate to relative precision near 0. Requires |x| <= 1/2.
  double h(double x) const;
  double h_prime(double x) const;

  // g^(ell)(eps) = 1/2 - h^(ell)(1/2 - eps).
  double g_iterate(double eps, int ell) const;

 private:
  int m_;
  int half_;  // (m - 1) / 2
  double gamma_;
  std::vector<double> log_binom_;  // log C(m, k), k = 0..m
  std::vector<double> gl_nodes_;   // Gauss-Legendre on [0, 1]
  std::vector<double> gl_weights_;
};

double g_eval(int m, double x);
double g_prime(int m, double x);

// m * C(m-1, (m-1)/2) * 2^-(m-1). Throws InvalidArgument for even m or m < 3.
double gamma(int m);
// gamma(m) = m / (m-1) * gamma(m-2) from gamma(3) = 3/2.
double gamma_by_recursion(int m);
// log((m+1)/2) / log(gamma(m)).
double beta(int m);

struct LimitEvaluation {
  double alpha = 0.0;
  double value = 0.0;     // L(alpha), in (-1/2, 1/2)
  // log(1/2 - |L(alpha)|); holds the tail below double precision.
  double log_tail = 0.0;
  int depth_used = 0;
  bool tail_form = false;  // value was finished in eps-space
};

struct TailProbability {
  double value = 0.0;      // P(W_m >= x) = 1/2 - L(x); may underflow to 0
  double log_value = 0.0;  // always finite
};

// L(alpha) and everything derived from it, for one m.
class LimitFunction {
 public:
  explicit LimitFunction(Params params);

  const Params& params() const noexcept { return params_; }
  const MajorityMap& map() const noexcept { return map_; }

  // Throws InvalidArgument for non-finite alpha and ToleranceNotReached
  // (carrying the best value) when max_depth is exhausted.
  LimitEvaluation evaluate(double alpha) const;
  double operator()(double alpha) const { return evaluate(alpha).value; }

  // L'(alpha) as the truncated product of gamma^-1 h'(L(alpha gamma^-k)).
  double derivative(double alpha) const;

  // F_m(x) = 1/2 + L(x).
  double cdf(double x) const;

  // Throws InvalidArgument for x < 0.
  TailProbability tail(double x) const;

  // Quantile of F_m; throws InvalidArgument unless q in (0, 1).
  double inverse(double q) const;

 private:
  Params params_;
  MajorityMap map_;
};

// e^{-pi x^2}, the large-m limit of L'.
double gaussian_limit_density(double x);

}  // namespace flipscale::itermaj
