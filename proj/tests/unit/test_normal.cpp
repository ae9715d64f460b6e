#include <doctest.h>

#include <cmath>
#include <limits>

#include "flipscale/errors.hpp"
#include "flipscale/normal.hpp"

using namespace flipscale;

TEST_SUITE("normal") {

TEST_CASE("cdf and density") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(normal_cdf(-8.0) == doctest::Approx(6.22096057427178e-16).epsilon(1e-10));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
}

TEST_CASE("quantile") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK(normal_quantile(0.0) < 0);
  CHECK(std::isinf(normal_quantile(1.0)));
  CHECK_THROWS_AS(normal_quantile(-0.1), InvalidArgument);
  CHECK_THROWS_AS(normal_quantile(1.5), InvalidArgument);
  for (double q = 0.001; q < 1.0; q += 0.0137) {
    REQUIRE(std::abs(normal_cdf(normal_quantile(q)) - q) < 1e-13);
  }
}

}  // TEST_SUITE
