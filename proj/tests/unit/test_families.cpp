#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "flipscale/errors.hpp"
#include "flipscale/families.hpp"
#include "flipscale/itermaj.hpp"
#include "zoo.hpp"

using namespace flipscale;

namespace {

BitConfig random_config(std::size_t n, double p, std::mt19937_64& gen) {
  std::bernoulli_distribution b(p);
  BitConfig w(n);
  for (std::size_t i = 0; i < n; ++i) w.set(i, b(gen));
  return w;
}

BitConfig edges(std::size_t v, std::initializer_list<std::pair<int, int>> list) {
  BitConfig w(v * (v - 1) / 2);
  for (auto [a, b] : list) w.set(edge_index(v, a - 1, b - 1), true);
  return w;
}

double log_first_moment(double v, double l, double p) {
  return std::lgamma(v + 1) - std::lgamma(l + 1) - std::lgamma(v - l + 1) +
         l * (l - 1) / 2 * std::log(p);
}

}  // namespace

TEST_SUITE("families") {

TEST_CASE("family names round-trip") {
  for (const auto& spec : zoo::small()) {
    CHECK(parse_family(to_string(spec.family)) == spec.family);
  }
  CHECK(parse_family("itermaj") == Family::kIteratedMajority);
  CHECK(parse_family("constant") == Family::kConstant);
  CHECK_THROWS_AS(parse_family("parity"), InvalidArgument);
}

TEST_CASE("direct definitions") {
  auto maj = make_family(zoo::bits(Family::kMajority, 5));
  CHECK(maj->evaluate(BitConfig(std::vector<std::uint8_t>{1, 0, 1, 0, 1})));
  CHECK_FALSE(maj->evaluate(BitConfig(std::vector<std::uint8_t>{1, 0, 0, 0, 1})));

  auto im = make_family(zoo::itermaj(3, 2));
  CHECK(im->size() == 9);
  CHECK(im->evaluate(BitConfig::ones(9)));
  // Two of three groups carry a majority.
  CHECK(im->evaluate(BitConfig(std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 0, 0, 0})));
  CHECK_FALSE(im->evaluate(BitConfig(std::vector<std::uint8_t>{1, 1, 0, 1, 0, 0, 0, 1, 0})));

  auto tri = make_family(zoo::graph(Family::kTriangle, 4));
  CHECK(tri->size() == 6);
  CHECK(tri->evaluate(edges(4, {{1, 2}, {1, 3}, {2, 3}})));
  CHECK_FALSE(tri->evaluate(edges(4, {{1, 2}, {1, 3}, {1, 4}})));

  auto conn = make_family(zoo::graph(Family::kConnectivity, 4));
  CHECK(conn->evaluate(edges(4, {{1, 2}, {1, 3}, {1, 4}})));
  CHECK_FALSE(conn->evaluate(edges(4, {{1, 2}, {3, 4}})));

  auto clique_spec = zoo::graph(Family::kClique, 5);
  clique_spec.clique_size_override = 4;
  auto cl = make_family(clique_spec);
  CHECK(cl->evaluate(edges(5, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}})));
  CHECK_FALSE(cl->evaluate(edges(5, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 5}})));

  auto ct = make_family(zoo::bits(Family::kCircularTribes, 8));  // run length 3
  CHECK(ct->evaluate(BitConfig(std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0, 0, 1})));
  CHECK_FALSE(ct->evaluate(BitConfig(std::vector<std::uint8_t>{1, 1, 0, 1, 1, 0, 1, 0})));

  auto amd = make_family(zoo::bits(Family::kAndMajorityDictator, 5));
  CHECK(amd->evaluate(BitConfig(std::vector<std::uint8_t>{1, 1, 1, 0, 0})));
  CHECK_FALSE(amd->evaluate(BitConfig(std::vector<std::uint8_t>{0, 1, 1, 1, 1})));
}

TEST_CASE("biased majority threshold rounds up") {
  auto f = make_family(zoo::biased_majority(10, 0.35));  // needs 4 ones
  CHECK_FALSE(f->evaluate(BitConfig::from_mask(10, 0b111)));
  CHECK(f->evaluate(BitConfig::from_mask(10, 0b1111)));
  auto g = make_family(zoo::biased_majority(10, 0.3));  // exactly 3 ones
  CHECK(g->evaluate(BitConfig::from_mask(10, 0b111)));
}

TEST_CASE("sizes and parameters") {
  CHECK(tribe_length(65536) == 12);
  CHECK(tribe_length(4) == 1);
  CHECK_THROWS_AS(tribe_length(3), InvalidArgument);
  CHECK(circular_run_length(512) == 9);
  CHECK(circular_run_length(1000) == 9);
  CHECK(edge_index(4, 0, 1) == 0);
  CHECK(edge_index(4, 0, 3) == 2);
  CHECK(edge_index(4, 1, 2) == 3);
  CHECK(edge_index(4, 3, 2) == 5);
  CHECK(zoo::itermaj(3, 12).bit_count() == 531441);
  CHECK(zoo::graph(Family::kTriangle, 500).bit_count() == 124750);

  CHECK_THROWS_AS(make_family(zoo::itermaj(4, 2)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::itermaj(3, 0)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::itermaj(3, 40)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::bits(Family::kTribes, 3)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::bits(Family::kMajority, 0)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::biased_majority(10, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::graph(Family::kTriangle, 2)), InvalidArgument);
  CHECK_THROWS_AS(make_family(zoo::bits(Family::kCircularTribes, 1)), InvalidArgument);
}

TEST_CASE("clique size") {
  CHECK(clique_size(3, 0.5) == 2);
  for (std::size_t v = 3; v <= 40; ++v) {
    std::size_t best = 1;
    for (std::size_t l = 1; l <= v; ++l) {
      double mean = 1;
      for (std::size_t j = 0; j < l; ++j) mean *= static_cast<double>(v - j) / static_cast<double>(j + 1);
      mean *= std::pow(0.5, static_cast<double>(l * (l - 1) / 2));
      if (mean >= 1) best = l;
    }
    REQUIRE(clique_size(v, 0.5) == best);
  }
  for (std::size_t v : {256u, 1024u, 4096u}) {
    const double ratio = static_cast<double>(clique_size(v, 0.5)) / (2 * std::log2(v));
    CHECK(ratio >= 0.6);
    CHECK(ratio <= 1.2);
    const auto l = static_cast<double>(clique_size(v, 0.5));
    CHECK(log_first_moment(static_cast<double>(v), l, 0.5) >= 0);
    CHECK(log_first_moment(static_cast<double>(v), l + 1, 0.5) < 0);
  }
  CHECK_THROWS_AS(clique_size(2, 0.5), InvalidArgument);
  CHECK_THROWS_AS(clique_size(10, 1.0), InvalidArgument);
}

TEST_CASE("limit laws") {
  auto tribes = limit_law(zoo::bits(Family::kTribes, 65536));
  CHECK(tribes.cdf(0.0) == doctest::Approx(0.632121).epsilon(1e-6));
  auto nrm = tribes.normalization(65536);
  CHECK(nrm.a == doctest::Approx(32.0));
  CHECK(nrm.b == doctest::Approx(std::pow(0.5, 1.0)));
  auto t2 = limit_law(zoo::bits(Family::kTribes, 1024)).normalization(1024);
  const double alpha = (10 - std::log2(10.0)) / 6.0;
  CHECK(t2.b == doctest::Approx(std::pow(0.5, alpha)).epsilon(1e-14));

  auto maj = limit_law(zoo::bits(Family::kMajority, 10001));
  CHECK(maj.cdf(0.0) == doctest::Approx(0.5));
  CHECK(maj.normalization(10001).a == doctest::Approx(std::sqrt(4.0 * 10001)));
  CHECK(maj.normalization(10001).b == 0.5);
  auto biased = limit_law(zoo::biased_majority(100, 0.2));
  CHECK(biased.normalization(100).a == doctest::Approx(std::sqrt(100 / 0.16)));

  auto tri = limit_law(zoo::graph(Family::kTriangle, 500));
  CHECK(tri.cdf(1.0) == doctest::Approx(0.153518).epsilon(1e-6));
  CHECK(tri.cdf(-1.0) == 0.0);
  CHECK(tri.normalization_for(zoo::graph(Family::kTriangle, 500)).a == 500.0);

  auto conn = limit_law(zoo::graph(Family::kConnectivity, 500));
  CHECK(conn.cdf(0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(conn.normalization(500).b == doctest::Approx(std::log(500.0) / 500));

  auto im = limit_law(zoo::itermaj(3, 12));
  CHECK(im.cdf(0.0) == doctest::Approx(0.5));
  CHECK(im.normalization(12).a == doctest::Approx(std::pow(1.5, 12)));
  CHECK(im.density(0.0) == doctest::Approx(1.0));

  auto dict = limit_law(zoo::bits(Family::kDictator, 3));
  CHECK(dict.cdf(0.25) == 0.25);
  CHECK(dict.cdf(2.0) == 1.0);
  auto orl = limit_law(zoo::bits(Family::kOr, 10));
  CHECK(orl.cdf(1.0) == doctest::Approx(1 - std::exp(-1.0)));
  CHECK(orl.normalization(10).a == 10.0);
  auto amd = limit_law(zoo::bits(Family::kAndMajorityDictator, 10));
  CHECK(amd.cdf(0.4) == 0.0);
  CHECK(amd.cdf(0.7) == 0.7);

  CHECK_THROWS_AS(limit_law(zoo::bits(Family::kCircularTribes, 64)), Unsupported);
  auto clique = zoo::graph(Family::kClique, 64);
  CHECK_THROWS_AS(limit_law(clique), Unsupported);
  clique.clique_pn = 0.5;
  clique.clique_lambda = 2.0;
  auto cl = limit_law(clique);
  CHECK(cl.cdf(0.0) == doctest::Approx(1 - std::exp(-2.0)));
  const double l = static_cast<double>(clique_size(64, 0.5));
  CHECK(cl.normalization(64).a == doctest::Approx(l * l));

  // Every stated law is a distribution function on a grid.
  std::vector<FamilySpec> specs = zoo::small();
  specs.push_back(clique);
  for (const auto& spec : specs) {
    if (spec.family == Family::kClique && !spec.clique_pn) continue;
    if (spec.family == Family::kCircularTribes) continue;
    auto law = limit_law(spec);
    CAPTURE(law.name);
    double prev = 0;
    for (double x = -30; x <= 30; x += 0.05) {
      const double v = law.cdf(x);
      REQUIRE(v >= prev);
      REQUIRE(v <= 1.0);
      prev = v;
    }
    CHECK(law.cdf(-1e3) < 1e-9);
    CHECK(law.cdf(1e3) > 1 - 1e-9);
  }
}

TEST_CASE("monotonicity on dominating pairs") {
  std::mt19937_64 gen(2024);
  for (const auto& spec : zoo::desk()) {
    auto f = make_family(spec);
    CAPTURE(f->name());
    const std::size_t n = f->size();
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 1000; ++k) {
      // Draw around the threshold region so both outputs occur.
      const double p = u(gen);
      BitConfig lo = random_config(n, p, gen);
      BitConfig hi = lo;
      const double extra = u(gen) * 0.2;
      for (std::size_t i = 0; i < n; ++i) {
        if (!hi[i] && u(gen) < extra) hi.set(i, true);
      }
      REQUIRE(lo.dominated_by(hi));
      REQUIRE(f->evaluate(lo) <= f->evaluate(hi));
    }
  }
}

TEST_CASE("incremental evaluation matches full evaluation") {
  std::mt19937_64 gen(77);
  for (const auto& spec : zoo::desk()) {
    auto f = make_family(spec);
    CAPTURE(f->name());
    const std::size_t n = f->size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int rep = 0; rep < 200; ++rep) {
      std::shuffle(order.begin(), order.end(), gen);
      auto state = f->start();
      REQUIRE(state);
      BitConfig w(n);
      REQUIRE(state->value() == f->evaluate(w));
      bool reached = false;
      for (std::size_t j = 0; j < n; ++j) {
        w.set(order[j], true);
        const bool inc = state->insert(order[j]);
        // Once the output is 1 it stays 1; check every prefix until then
        // and a sample afterwards.
        if (!reached || j % 16 == 0 || j + 1 == n) {
          REQUIRE(inc == f->evaluate(w));
        }
        REQUIRE(inc == state->value());
        reached = reached || inc;
      }
    }
  }
}

TEST_CASE("tribes flip time equals the witness oracle") {
  auto f = make_family(zoo::bits(Family::kTribes, 256));
  auto witnesses = f->one_witnesses();
  REQUIRE(witnesses);
  CHECK(witnesses->size() == 256 / tribe_length(256));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto l = assign_uniform_labels(256, seed);
    auto a = flip_time(*f, l);
    auto b = flip_time_via_witnesses(*witnesses, l);
    REQUIRE(a.value == b.value);
    REQUIRE(a.pivotal_bit == b.pivotal_bit);
    REQUIRE(flip_time_by_insertion(*f, l.labels()).value == a.value);
  }
}

TEST_CASE("declared witnesses agree with flip_time") {
  for (const auto& spec : zoo::small()) {
    auto f = make_family(spec);
    auto w = f->one_witnesses();
    if (!w) continue;
    CAPTURE(f->name());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto l = assign_uniform_labels(f->size(), seed);
      REQUIRE(flip_time_via_witnesses(*w, l).value == flip_time(*f, l).value);
    }
  }
}

TEST_CASE("pivotal fast paths equal flip-and-reevaluate") {
  std::mt19937_64 gen(5);
  std::vector<FamilySpec> specs = zoo::desk();
  for (const auto& s : zoo::small()) specs.push_back(s);
  specs.push_back(zoo::bits(Family::kCircularTribes, 2));
  specs.push_back(zoo::bits(Family::kCircularTribes, 3));
  specs.push_back(zoo::bits(Family::kCircularTribes, 16));
  specs.push_back(zoo::itermaj(7, 2));
  for (const auto& spec : specs) {
    auto f = make_family(spec);
    CAPTURE(f->name());
    const std::size_t n = f->size();
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 300; ++k) {
      double p = u(gen);
      if (k == 0) p = 0.0;
      if (k == 1) p = 1.0;
      BitConfig w = random_config(n, p, gen);
      std::vector<std::uint8_t> fast, slow;
      const auto cf = f->count_pivotal(w, &fast);
      const auto cs = f->MonotoneFunction::count_pivotal(w, &slow);
      REQUIRE(cf == cs);
      REQUIRE(fast == slow);
      REQUIRE(f->count_pivotal(w, nullptr) == cf);
    }
  }
}

TEST_CASE("symmetry classes") {
  for (const auto& spec : zoo::desk()) {
    auto f = make_family(spec);
    CHECK(f->symmetry_classes().size() == f->size());
  }
  auto t = make_family(zoo::bits(Family::kTribes, 100));  // l = 3, 33 tribes
  auto c = t->symmetry_classes();
  CHECK(tribe_length(100) == 3);
  CHECK(std::count(c.begin(), c.end(), 0u) == 99);
  CHECK(c[99] == 1);
  auto d = make_family(zoo::bits(Family::kDictator, 5))->symmetry_classes();
  CHECK(d == std::vector<std::uint32_t>{0, 1, 1, 1, 1});
}

TEST_CASE("large itermaj direct flip time matches insertion") {
  auto f = make_family(zoo::itermaj(3, 8));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto l = assign_uniform_labels(f->size(), seed);
    auto a = flip_time(*f, l);
    auto b = flip_time_by_insertion(*f, l.labels());
    CHECK(a.value == b.value);
    CHECK(a.pivotal_bit == b.pivotal_bit);
  }
  auto g = make_family(zoo::itermaj(5, 4));
  auto l = assign_uniform_labels(g->size(), 9);
  CHECK(flip_time(*g, l).value == flip_time_by_insertion(*g, l.labels()).value);
}

TEST_CASE("graph flip times at moderate size") {
  for (auto fam : {Family::kTriangle, Family::kConnectivity, Family::kClique}) {
    auto f = make_family(zoo::graph(fam, 40));
    CAPTURE(f->name());
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto l = assign_uniform_labels(f->size(), seed);
      auto t = flip_time(*f, l);
      REQUIRE(t.pivotal_bit);
      CHECK_FALSE(f->evaluate(configuration_at(l, std::nextafter(t.value, 0.0))));
      CHECK(f->evaluate(configuration_at(l, t.value)));
    }
  }
}

}  // TEST_SUITE
