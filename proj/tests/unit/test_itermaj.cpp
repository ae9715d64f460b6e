#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "flipscale/errors.hpp"
#include "flipscale/itermaj.hpp"

using namespace flipscale;
using namespace flipscale::itermaj;

namespace {

LimitFunction limit(int m) {
  Params p;
  p.m = m;
  return LimitFunction(p);
}

double binom(int n, int k) {
  double r = 1;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

// Least-squares slope of log(-log P(W >= x)) against log x on [2, 20].
double tail_slope(int m) {
  auto L = limit(m);
  std::vector<double> xs, ys;
  for (int i = 0; i < 37; ++i) {
    const double x = 2.0 * std::pow(10.0, i / 36.0);
    xs.push_back(std::log(x));
    ys.push_back(std::log(-L.tail(x).log_value));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_SUITE("itermaj") {

TEST_CASE("g and its derivative") {
  CHECK(g_eval(3, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g_eval(3, 0.6) == doctest::Approx(0.648).epsilon(1e-14));
  for (int m = 3; m <= 21; m += 2) {
    CHECK(g_eval(m, 0.0) == 0.0);
    CHECK(g_eval(m, 1.0) == 1.0);
    CHECK(g_prime(m, 0.0) == 0.0);
    CHECK(std::abs(g_prime(m, 0.5) - gamma(m)) < 1e-14 * gamma(m));
  }
  // Direct binomial sum for a mid-size arity.
  for (double x : {0.1, 0.37, 0.5, 0.81}) {
    double s = 0;
    for (int k = 6; k <= 11; ++k) s += binom(11, k) * std::pow(x, k) * std::pow(1 - x, 11 - k);
    CHECK(g_eval(11, x) == doctest::Approx(s).epsilon(1e-13));
  }
  CHECK(g_prime(3, 0.5) == doctest::Approx(1.5).epsilon(1e-15));
  const double h = 1e-5;
  const double fd = (g_eval(5, 0.3 + h) - g_eval(5, 0.3 - h)) / (2 * h);
  CHECK(std::abs(g_prime(5, 0.3) - fd) <= 1e-6);
  CHECK_THROWS_AS(g_eval(3, 1.2), InvalidArgument);
  CHECK_THROWS_AS(g_eval(3, -0.2), InvalidArgument);
}

TEST_CASE("gamma and beta") {
  CHECK(gamma(3) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(gamma(5) == doctest::Approx(1.875).epsilon(1e-15));
  const double stirling = std::sqrt(2.0 * 101 / M_PI);
  CHECK(gamma(101) / stirling >= 0.99);
  CHECK(gamma(101) / stirling <= 1.01);
  for (int m = 3; m <= 199; m += 2) {
    REQUIRE(std::abs(gamma(m) - gamma_by_recursion(m)) <= 1e-12);
    // Equality at m = 3 (gamma(3) = 3/2), strict afterwards.
    REQUIRE(gamma(m) <= m / 2.0);
    if (m > 3) REQUIRE(gamma(m) < m / 2.0);
    REQUIRE(gamma(m) > 1.0);
    REQUIRE(beta(m) > 1.0);
    REQUIRE(beta(m) < 2.0);
    if (m + 2 <= 199) REQUIRE(beta(m) < beta(m + 2));
  }
  CHECK(beta(3) == doctest::Approx(std::log(2.0) / std::log(1.5)).epsilon(1e-14));
  CHECK(beta(3) == doctest::Approx(1.70951).epsilon(1e-5));
  CHECK(beta(5) == doctest::Approx(std::log(3.0) / std::log(1.875)).epsilon(1e-14));
  CHECK_THROWS_AS(gamma(4), InvalidArgument);
  CHECK_THROWS_AS(gamma(1), InvalidArgument);
  CHECK_THROWS_AS(beta(6), InvalidArgument);
}

TEST_CASE("parameter validation") {
  Params p;
  p.m = 4;
  CHECK_THROWS_AS(LimitFunction{p}, InvalidArgument);
  p.m = 3;
  p.tol = 1e-2;
  CHECK_THROWS_AS(LimitFunction{p}, InvalidArgument);
  p.tol = 0;
  CHECK_THROWS_AS(LimitFunction{p}, InvalidArgument);
}

TEST_CASE("L basic values and symmetry") {
  for (int m : {3, 5, 7, 11}) {
    CHECK(limit(m)(0.0) == 0.0);
  }
  auto L = limit(3);
  for (double a : {0.5, 1.0, 2.0}) {
    CHECK(std::abs(L(-a) + L(a)) <= 1e-12);
  }
  CHECK(L(1000.0) > 0.499);
  CHECK(L(1000.0) < 0.5);
  CHECK(L(-1e6) > -0.5);
  CHECK_THROWS_AS(L.evaluate(std::nan("")), InvalidArgument);
  CHECK_THROWS_AS(L.evaluate(INFINITY), InvalidArgument);
  auto e = L.evaluate(30.0);
  CHECK(e.tail_form);
  CHECK(e.log_tail < -300);
}

TEST_CASE("depth cap reports the best value") {
  Params p;
  p.max_depth = 3;
  LimitFunction L(p);
  try {
    L.evaluate(1.0);
    FAIL("expected ToleranceNotReached");
  } catch (const ToleranceNotReached& err) {
    CHECK(std::abs(err.best_value()) < 0.5);
    CHECK(err.kind() == ErrorKind::kToleranceNotReached);
  }
}

TEST_CASE("conjugacy h(L(a)) = L(gamma a)") {
  for (int m : {3, 5, 7}) {
    auto L = limit(m);
    const auto& map = L.map();
    double worst = 0;
    for (int i = 0; i <= 120; ++i) {
      const double a = -3.0 + 0.05 * i;
      worst = std::max(worst, std::abs(map.h(L(a)) - L(a * map.gamma())));
    }
    CAPTURE(m);
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("L is 1-Lipschitz and strictly increasing") {
  auto L = limit(3);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(gen), b = u(gen);
    REQUIRE(std::abs(L(a) - L(b)) <= std::abs(a - b) + 1e-15);
  }
  // Deep in the tails L is within one ulp of 1/2, so order is checked on
  // the log gap, which is exact there.
  auto key = [&](double a) {
    auto e = L.evaluate(a);
    return a >= 0 ? -e.log_tail : e.log_tail;
  };
  double prev = key(-5.0);
  for (int i = 1; i <= 1000; ++i) {
    const double a = -5.0 + 0.01 * i;
    const double cur = key(a);
    REQUIRE(cur > prev);
    prev = cur;
  }
  for (int i = 1; i <= 300; ++i) {
    REQUIRE(L(-1.5 + 0.01 * i) > L(-1.5 + 0.01 * (i - 1)));
  }
}

TEST_CASE("derivative") {
  auto L = limit(3);
  CHECK(L.derivative(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  const double h = 1e-5;
  const double fd = (L(1 + h) - L(1 - h)) / (2 * h);
  CHECK(std::abs(L.derivative(1.0) - fd) <= 1e-6);
  CHECK(L.derivative(0.5) > L.derivative(1.0));
  CHECK(L.derivative(1.0) > L.derivative(2.0));
  CHECK(L.derivative(2.0) > 0.0);
  CHECK(L.derivative(-1.0) == doctest::Approx(L.derivative(1.0)).epsilon(1e-14));
  for (int m : {5, 7}) {
    auto Lm = limit(m);
    const double fdm = (Lm(0.7 + h) - Lm(0.7 - h)) / (2 * h);
    CHECK(std::abs(Lm.derivative(0.7) - fdm) <= 1e-6);
  }
}

TEST_CASE("tail probabilities") {
  auto L = limit(3);
  CHECK(L.tail(0.0).value == 0.5);
  CHECK_THROWS_AS(L.tail(-1.0), InvalidArgument);
  double prev = 1.0;
  for (int i = 0; i <= 20; ++i) {
    const double t = L.tail(0.5 * i).log_value;
    REQUIRE(t < prev);
    prev = t;
  }
  const double s3 = tail_slope(3);
  const double s5 = tail_slope(5);
  CHECK(std::abs(s3 - beta(3)) <= 0.15);
  CHECK(std::abs(s5 - beta(5)) <= 0.15);
}

TEST_CASE("small-eps sandwich for m = 3") {
  MajorityMap map(3);
  for (double eps : {1e-2, 1e-3}) {
    for (int ell : {1, 2, 3}) {
      const double v = map.g_iterate(eps, ell);
      const double power = std::pow(2.0, ell);
      CAPTURE(eps);
      CAPTURE(ell);
      CHECK(std::pow(eps, power) <= v);
      CHECK(v <= std::pow(9 * eps, power));
      CHECK(v == doctest::Approx(0.5 - [&] {
                  double x = 0.5 - eps;
                  for (int k = 0; k < ell; ++k) x = map.h(x);
                  return x;
                }()).epsilon(1e-6));
    }
  }
}

TEST_CASE("h is convex on the left half and concave on the right") {
  for (int m : {3, 5, 9}) {
    MajorityMap map(m);
    const double d = 1e-3;
    for (int i = -499; i <= 499; ++i) {
      const double x = i * d;
      const double second = map.h(x + d) - 2 * map.h(x) + map.h(x - d);
      if (i < 0) REQUIRE(second >= -1e-15);
      if (i > 0) REQUIRE(second <= 1e-15);
    }
    CHECK(map.h(0.0) == 0.0);
    CHECK(map.h_prime(0.0) == doctest::Approx(map.gamma()).epsilon(1e-14));
  }
}

TEST_CASE("gaussian limit") {
  CHECK(gaussian_limit_density(0.0) == 1.0);
  // Composite Simpson on [-5, 5].
  const int k = 2000;
  const double h = 10.0 / k;
  double s = gaussian_limit_density(-5) + gaussian_limit_density(5);
  for (int i = 1; i < k; ++i) s += (i % 2 ? 4 : 2) * gaussian_limit_density(-5 + i * h);
  CHECK(std::abs(s * h / 3 - 1.0) <= 1e-6);

  auto L = limit(101);
  double worst = 0;
  for (int i = 0; i <= 400; ++i) {
    const double x = -2.0 + 0.01 * i;
    worst = std::max(worst, std::abs(L.derivative(x) - gaussian_limit_density(x)));
  }
  CHECK(worst <= 0.02);
}

TEST_CASE("inverse") {
  auto L = limit(3);
  CHECK(L.inverse(0.5) == 0.0);
  for (double q : {0.1, 0.9, 0.001, 0.75}) {
    CHECK(std::abs(L.cdf(L.inverse(q)) - q) <= 1e-9);
  }
  CHECK(std::abs(L.inverse(0.9) + L.inverse(0.1)) <= 1e-9);
  CHECK_THROWS_AS(L.inverse(0.0), InvalidArgument);
  CHECK_THROWS_AS(L.inverse(1.0), InvalidArgument);
}

}  // TEST_SUITE
