#include "flipscale/itermaj.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "flipscale/errors.hpp"

namespace flipscale::itermaj {

namespace {

void check_arity(int m) {
  if (m < 3 || m % 2 == 0) {
    throw InvalidArgument("iterated majority needs odd m >= 3, got " +
                          std::to_string(m));
  }
}

// Gauss-Legendre rule with k nodes on [0, 1] (Newton on P_k).
void gauss_legendre(int k, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(k, 0.0);
  weights.assign(k, 0.0);
  for (int i = 0; i < (k + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (k + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= k; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = k * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // Map [-1, 1] -> [0, 1].
    nodes[i] = 0.5 * (1.0 - z);
    nodes[k - 1 - i] = 0.5 * (1.0 + z);
    weights[i] = weights[k - 1 - i] = 0.5 * w;
  }
}

double log_sum_exp(const std::vector<double>& terms) {
  double top = -std::numeric_limits<double>::infinity();
  for (double t : terms) top = std::max(top, t);
  if (!std::isfinite(top)) return top;
  // Smaller terms first.
  std::vector<double> sorted(terms);
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (double t : sorted) acc += std::exp(t - top);
  return top + std::log(acc);
}

}  // namespace

void Params::validate() const {
  check_arity(m);
  if (!(tol > 0.0 && tol < 1e-3)) {
    throw InvalidArgument("iterated majority tolerance must lie in (0, 1e-3)");
  }
  if (max_depth < 1) throw InvalidArgument("max_depth must be >= 1");
}

MajorityMap::MajorityMap(int m) : m_(m), half_((m - 1) / 2) {
  check_arity(m);
  gamma_ = itermaj::gamma(m);
  log_binom_.resize(m + 1);
  if (m <= 60) {
    double c = 1.0;
    for (int k = 0; k <= m; ++k) {
      log_binom_[k] = std::log(c);
      c = c * (m - k) / (k + 1);
    }
  } else {
    for (int k = 0; k <= m; ++k) {
      log_binom_[k] =
          std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
    }
  }
  // h' is a polynomial of degree m - 1, integrated exactly by (m + 1) / 2
  // nodes; one extra node for margin.
  gauss_legendre((m + 1) / 2 + 1, gl_nodes_, gl_weights_);
}

double MajorityMap::g(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("g: x must lie in [0, 1]");
  if (x == 0.5) return 0.5;
  if (x > 0.5) return 1.0 - g(1.0 - x);
  if (x == 0.0) return 0.0;
  return std::exp(log_g_small(std::log(x)));
}

double MajorityMap::log_g_small(double log_x) const {
  const double x = std::exp(log_x);
  const double log_1mx = std::log1p(-x);
  std::vector<double> terms;
  terms.reserve(m_ - half_);
  for (int k = half_ + 1; k <= m_; ++k) {
    terms.push_back(log_binom_[k] + k * log_x + (m_ - k) * log_1mx);
  }
  return log_sum_exp(terms);
}

double MajorityMap::g_prime(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw InvalidArgument("g_prime: x must lie in [0, 1]");
  }
  // ((m+1)/2) C(m, (m-1)/2) [x(1-x)]^((m-1)/2) = gamma (4x(1-x))^((m-1)/2).
  const double base = 4.0 * x * (1.0 - x);
  if (base <= 0.0) return 0.0;
  return gamma_ * std::exp(half_ * std::log(base));
}

double MajorityMap::h(double x) const {
  if (!(std::abs(x) <= 0.5)) throw InvalidArgument("h: |x| must be <= 1/2");
  if (x == 0.0) return 0.0;
  if (std::abs(x) == 0.5) return x;
  const double ax = std::abs(x);
  // h(x) = gamma * int_0^x (1 - 4t^2)^((m-1)/2) dt, positive integrand.
  double acc = 0.0;
  for (std::size_t i = 0; i < gl_nodes_.size(); ++i) {
    const double t = ax * gl_nodes_[i];
    acc += gl_weights_[i] * std::exp(half_ * std::log1p(-4.0 * t * t));
  }
  const double v = std::min(0.5, gamma_ * ax * acc);
  return std::copysign(v, x);
}

double MajorityMap::h_prime(double x) const { return g_prime(0.5 + x); }

double MajorityMap::g_iterate(double eps, int ell) const {
  if (!(eps >= 0.0 && eps <= 0.5)) {
    throw InvalidArgument("g_iterate: eps must lie in [0, 1/2]");
  }
  if (eps == 0.0) return 0.0;
  double le = std::log(eps);
  for (int i = 0; i < ell; ++i) le = log_g_small(le);
  return std::exp(le);
}

double g_eval(int m, double x) { return MajorityMap(m).g(x); }
double g_prime(int m, double x) { return MajorityMap(m).g_prime(x); }

double gamma(int m) {
  check_arity(m);
  const int half = (m - 1) / 2;
  // C(m-1, half) by the multiplicative formula, then scale by 2^-(m-1).
  long double c = 1.0L;
  for (int j = 1; j <= half; ++j) c = c * (half + j) / j;
  return static_cast<double>(m * std::ldexp(c, -(m - 1)));
}

double gamma_by_recursion(int m) {
  check_arity(m);
  double g = 1.5;
  for (int k = 5; k <= m; k += 2) g *= static_cast<double>(k) / (k - 1);
  return g;
}

double beta(int m) { return std::log((m + 1) / 2.0) / std::log(gamma(m)); }

double gaussian_limit_density(double x) {
  return std::exp(-std::numbers::pi * x * x);
}

namespace {

// A point of [0, 1/2) stored directly or, once above 1/4, as log(1/2 - x).
struct Point {
  double x = 0.0;
  double log_eps = 0.0;
  bool tail = false;

  double value() const { return tail ? 0.5 - std::exp(log_eps) : x; }
  double log_gap() const { return tail ? log_eps : std::log(0.5 - x); }
};

constexpr double kTailSwitch = 0.25;
const double kBelowHalf = std::nextafter(0.5, 0.0);

Point step(const MajorityMap& map, Point p) {
  if (p.tail) {
    p.log_eps = map.log_g_small(p.log_eps);
    return p;
  }
  p.x = map.h(p.x);
  if (p.x > kTailSwitch) {
    p.tail = true;
    p.log_eps = std::log(0.5 - p.x);
  }
  return p;
}

Point iterate(const MajorityMap& map, double x0, int steps) {
  Point p;
  p.x = x0;
  if (x0 > kTailSwitch) {
    p.tail = true;
    p.log_eps = std::log(0.5 - x0);
  }
  for (int i = 0; i < steps; ++i) p = step(map, p);
  return p;
}

}  // namespace

LimitFunction::LimitFunction(Params params)
    : params_(params), map_((params.validate(), params.m)) {}

LimitEvaluation LimitFunction::evaluate(double alpha) const {
  if (!std::isfinite(alpha)) {
    throw InvalidArgument("L: alpha must be finite");
  }
  LimitEvaluation out;
  out.alpha = alpha;
  if (alpha == 0.0) {
    out.log_tail = std::log(0.5);
    return out;
  }
  const double a = std::abs(alpha);
  const double lg = std::log(map_.gamma());
  // First depth at which alpha gamma^-n is far below the tolerance.
  int n = static_cast<int>(std::ceil(std::log(a / params_.tol) / lg)) + 10;
  n = std::max(n, 1);
  auto at_depth = [&](int depth) {
    return iterate(map_, a * std::exp(-depth * lg), depth);
  };
  if (n > params_.max_depth) {
    throw ToleranceNotReached("L: required depth exceeds max_depth",
                              std::copysign(at_depth(params_.max_depth).value(),
                                            alpha));
  }
  Point prev = at_depth(n);
  for (int depth = n + 1; depth <= params_.max_depth; ++depth) {
    const Point cur = at_depth(depth);
    bool done = std::abs(cur.value() - prev.value()) < params_.tol;
    if (done && cur.tail && prev.tail) {
      const double scale = std::max(1.0, std::abs(cur.log_eps));
      done = std::abs(cur.log_eps - prev.log_eps) <= params_.tol * scale;
    }
    if (done) {
      // Keep |value| < 1/2 even when 1/2 - |L| is below double spacing;
      // log_tail still carries the exact gap.
      out.value = std::copysign(std::min(cur.value(), kBelowHalf), alpha);
      out.log_tail = cur.log_gap();
      out.depth_used = depth;
      out.tail_form = cur.tail;
      return out;
    }
    prev = cur;
  }
  throw ToleranceNotReached("L: successive depths did not agree within tol",
                            std::copysign(prev.value(), alpha));
}

double LimitFunction::derivative(double alpha) const {
  if (!std::isfinite(alpha)) {
    throw InvalidArgument("L': alpha must be finite");
  }
  const double a = std::abs(alpha);
  if (a == 0.0) return 1.0;
  const double lg = std::log(map_.gamma());
  const int half = (params_.m - 1) / 2;
  // Factors (1 - 4 L(a gamma^-k)^2)^half lie within tol of 1 once
  // L(a gamma^-k) is below this level.
  const double small = 0.5 * std::sqrt(params_.tol / (4.0 * half));
  int depth = 1;
  while (a * std::exp(-depth * lg) >= small) {
    if (++depth > params_.max_depth) {
      throw ToleranceNotReached("L': product depth exceeds max_depth", 0.0);
    }
  }
  // Walk back up from L(a gamma^-depth) via L(y gamma) = h(L(y)).
  Point p;
  p.x = evaluate(a * std::exp(-depth * lg)).value;
  double log_product = 0.0;
  for (int k = depth; k >= 1; --k) {
    if (p.tail) {
      // 1 - 4x^2 = 4 eps (1 - eps).
      const double eps = std::exp(p.log_eps);
      log_product += half * (std::log(4.0) + p.log_eps + std::log1p(-eps));
    } else {
      log_product += half * std::log1p(-4.0 * p.x * p.x);
    }
    if (k > 1) p = step(map_, p);
  }
  return std::exp(log_product);
}

double LimitFunction::cdf(double x) const {
  // The lower tail is returned from its log so it keeps full relative
  // precision.
  if (x < 0.0) return tail(-x).value;
  return 0.5 + evaluate(x).value;
}

TailProbability LimitFunction::tail(double x) const {
  if (!(x >= 0.0)) throw InvalidArgument("tail: x must be >= 0");
  const LimitEvaluation e = evaluate(x);
  TailProbability t;
  t.log_value = e.log_tail;
  t.value = e.tail_form ? std::exp(e.log_tail) : 0.5 - e.value;
  return t;
}

double LimitFunction::inverse(double q) const {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidArgument("L inverse: q must lie in (0, 1)");
  }
  if (q == 0.5) return 0.0;
  if (q < 0.5) return -inverse(1.0 - q);
  // Solve P(W >= alpha) = 1 - q on alpha > 0, comparing in log space.
  const double target = std::log1p(-q);
  auto above = [&](double alpha) { return tail(alpha).log_value > target; };
  double lo = 0.0;
  double hi = 1.0;
  while (above(hi)) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (above(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace flipscale::itermaj
