#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "flipscale/coupling.hpp"
#include "flipscale/errors.hpp"
#include "flipscale/families.hpp"
#include "flipscale/rng.hpp"
#include "zoo.hpp"

using namespace flipscale;

namespace {

// min{labels[i] : f(eta_{labels[i]}) = 1} by full evaluation at every label.
double brute_force_flip(const MonotoneFunction& f, const LabelAssignment& l) {
  double best = 2.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (l[i] < best && f.evaluate(configuration_at(l, l[i]))) best = l[i];
  }
  return best;
}

bool same_on_all_inputs(const MonotoneFunction& a, const MonotoneFunction& b) {
  const std::size_t n = a.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    const auto w = BitConfig::from_mask(n, mask);
    if (a.evaluate(w) != b.evaluate(w)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("coupling") {

TEST_CASE("labels are reproducible and in range") {
  auto one = assign_uniform_labels(1, 7);
  CHECK(one.size() == 1);
  CHECK(one[0] >= 0.0);
  CHECK(one[0] <= 1.0);

  auto a = assign_uniform_labels(10000, 123);
  auto b = assign_uniform_labels(10000, 123);
  CHECK(std::equal(a.labels().begin(), a.labels().end(), b.labels().begin()));
  CHECK(a.seed() == 123);

  auto big = assign_uniform_labels(100000, 99);
  double mean = std::accumulate(big.labels().begin(), big.labels().end(), 0.0) /
                static_cast<double>(big.size());
  CHECK(std::abs(mean - 0.5) < 0.01);
  for (double v : big.labels()) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }

  CHECK_THROWS_AS(assign_uniform_labels(0, 1), InvalidArgument);
  CHECK_THROWS_AS(LabelAssignment({0.5, 1.5}), InvalidArgument);
}

TEST_CASE("generator matches the documented SplitMix64 stream") {
  // Reference values of SplitMix64 seeded with 0.
  rng::SplitMix64 g(0);
  CHECK(g() == 0xE220A8397B1DCDAFULL);
  CHECK(g() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng::counter_bits(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(rng::counter_bits(0, 1) == 0x6E789E6AA1B965F4ULL);
  std::vector<double> filled(5);
  fill_uniform_labels(filled, 42);
  auto l = assign_uniform_labels(5, 42);
  CHECK(std::equal(filled.begin(), filled.end(), l.labels().begin()));
}

TEST_CASE("configuration_at") {
  LabelAssignment l({0.2, 0.7});
  CHECK(configuration_at(l, 0.5) == BitConfig(std::vector<std::uint8_t>{1, 0}));
  auto r = assign_uniform_labels(50, 3);
  CHECK(configuration_at(r, 0.0).count() == 0);
  CHECK(configuration_at(r, 1.0).count() == 50);
  CHECK_THROWS_AS(configuration_at(r, -0.1), InvalidArgument);
  CHECK_THROWS_AS(configuration_at(r, 1.1), InvalidArgument);
  BitConfig prev = configuration_at(r, 0.0);
  for (int k = 1; k <= 100; ++k) {
    BitConfig cur = configuration_at(r, k / 100.0);
    REQUIRE(prev.dominated_by(cur));
    prev = cur;
  }
}

TEST_CASE("flip_time on OR, AND and dictator") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto l = assign_uniform_labels(12, seed);
    auto lo = *std::min_element(l.labels().begin(), l.labels().end());
    auto hi = *std::max_element(l.labels().begin(), l.labels().end());
    auto orf = make_family(zoo::bits(Family::kOr, 12));
    auto andf = make_family(zoo::bits(Family::kAnd, 12));
    auto dict = make_family(zoo::bits(Family::kDictator, 12));
    CHECK(flip_time(*orf, l).value == lo);
    CHECK(flip_time(*andf, l).value == hi);
    CHECK(flip_time(*dict, l).value == l[0]);
    CHECK(flip_time_by_insertion(*orf, l.labels()).value == lo);
    CHECK(flip_time_by_insertion(*andf, l.labels()).value == hi);
    CHECK(flip_time_by_insertion(*dict, l.labels()).value == l[0]);
    auto ft = flip_time(*dict, l);
    REQUIRE(ft.pivotal_bit.has_value());
    CHECK(*ft.pivotal_bit == 0);
  }
}

TEST_CASE("flip_time errors") {
  auto zero = make_family([] {
    auto s = zoo::bits(Family::kConstant, 4);
    s.constant_value = false;
    return s;
  }());
  auto l = assign_uniform_labels(4, 1);
  CHECK_THROWS_AS(flip_time(*zero, l), NoFlip);
  CHECK_THROWS_AS(flip_time(*zero, l), NoFlip);

  auto one = make_family([] {
    auto s = zoo::bits(Family::kConstant, 4);
    s.constant_value = true;
    return s;
  }());
  auto t = flip_time(*one, l);
  CHECK(t.value == 0.0);
  CHECK_FALSE(t.pivotal_bit.has_value());

  auto orf = make_family(zoo::bits(Family::kOr, 5));
  CHECK_THROWS_AS(flip_time(*orf, l), InvalidArgument);
}

TEST_CASE("witness oracle") {
  auto l = assign_uniform_labels(9, 5);
  WitnessList singletons;
  for (std::size_t i = 0; i < 9; ++i) singletons.push_back({i});
  CHECK(flip_time_via_witnesses(singletons, l).value ==
        *std::min_element(l.labels().begin(), l.labels().end()));
  WitnessList full{{0, 1, 2, 3, 4, 5, 6, 7, 8}};
  CHECK(flip_time_via_witnesses(full, l).value ==
        *std::max_element(l.labels().begin(), l.labels().end()));
  CHECK_THROWS_AS(flip_time_via_witnesses({}, l), NoFlip);
  CHECK_THROWS_AS(flip_time_via_witnesses({{9}}, l), InvalidArgument);
}

TEST_CASE("flip_time matches brute force on every small family") {
  for (const auto& spec : zoo::small()) {
    auto f = make_family(spec);
    CAPTURE(f->name());
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
      auto l = assign_uniform_labels(f->size(), seed * 7919 + 1);
      const auto direct = flip_time(*f, l);
      const auto inserted = flip_time_by_insertion(*f, l.labels());
      REQUIRE(direct.value == inserted.value);
      REQUIRE(direct.pivotal_bit == inserted.pivotal_bit);
      REQUIRE(direct.value == brute_force_flip(*f, l));
      if (direct.pivotal_bit) REQUIRE(l[*direct.pivotal_bit] == direct.value);
      // Output switches exactly at the flip time.
      REQUIRE_FALSE(f->evaluate(configuration_at(l, direct.value - 1e-12)));
      REQUIRE(f->evaluate(configuration_at(l, direct.value)));
      REQUIRE(f->evaluate(configuration_at(l, std::min(1.0, direct.value + 1e-12))));
    }
  }
}

TEST_CASE("ties are broken by index") {
  LabelAssignment l({0.5, 0.25, 0.5, 0.5, 0.25});
  auto maj = make_family(zoo::bits(Family::kMajority, 5));
  auto t = flip_time(*maj, l);
  CHECK(t.value == 0.5);
  CHECK(*t.pivotal_bit == 0);
  auto u = flip_time_by_insertion(*maj, l.labels());
  CHECK(*u.pivotal_bit == 0);
  auto andf = make_family(zoo::bits(Family::kAnd, 5));
  CHECK(*flip_time(*andf, l).pivotal_bit == 3);
  CHECK(*flip_time_by_insertion(*andf, l.labels()).pivotal_bit == 3);
}

TEST_CASE("reverse") {
  auto orf = make_family(zoo::bits(Family::kOr, 4));
  auto andf = make_family(zoo::bits(Family::kAnd, 4));
  CHECK(same_on_all_inputs(*reverse(orf), *andf));
  auto dict = make_family(zoo::bits(Family::kDictator, 4));
  CHECK(same_on_all_inputs(*reverse(dict), *dict));
  auto maj = make_family(zoo::bits(Family::kMajority, 5));
  CHECK(same_on_all_inputs(*reverse(maj), *maj));
  CHECK_THROWS_AS(reverse(nullptr), InvalidArgument);

  for (const auto& spec : zoo::small()) {
    auto f = make_family(spec);
    if (f->size() > 12) continue;
    CAPTURE(f->name());
    CHECK(same_on_all_inputs(*reverse(reverse(f)), *f));
  }
}

TEST_CASE("sort_by_label agrees with a comparison sort") {
  auto l = assign_uniform_labels(5000, 11);
  std::vector<double> labels(l.labels().begin(), l.labels().end());
  for (std::size_t i = 0; i < 200; ++i) labels[i * 7] = labels[i * 7 + 1];  // ties
  std::vector<std::uint32_t> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0U);
  auto expected = idx;
  std::sort(expected.begin(), expected.end(), [&](auto a, auto b) {
    return labels[a] < labels[b] || (labels[a] == labels[b] && a < b);
  });
  std::shuffle(idx.begin(), idx.end(), std::mt19937(3));
  sort_by_label(idx, labels);
  CHECK(idx == expected);
}

}  // TEST_SUITE
