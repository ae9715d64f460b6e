#include "flipscale/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "flipscale/errors.hpp"
#include "flipscale/rng.hpp"
#include "flipscale/union_find.hpp"

namespace flipscale::percolation {

namespace {

constexpr int kOffsets[6][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}};

// Key of the event stream driving the clocks of dynamical run k.
constexpr std::uint64_t kClockSalt = 0xD1B54A32D192ED03ULL;

Estimate bernoulli(std::size_t hits, std::size_t N) {
  const double P = static_cast<double>(hits) / static_cast<double>(N);
  return Estimate{P, std::sqrt(P * (1 - P) / static_cast<double>(N)), N};
}

// Does the cluster of sites with state `state` containing some site touching
// side A also touch side B? Used with explicit per-site predicates.
template <typename IsMember, typename OnA, typename OnB>
bool spans(const Grid& g, IsMember member, OnA on_a, OnB on_b,
           std::vector<std::uint32_t>& stack, std::vector<std::uint8_t>& seen) {
  seen.assign(g.sites(), 0);
  stack.clear();
  for (std::size_t s = 0; s < g.sites(); ++s) {
    if (on_a(s) && member(s)) {
      seen[s] = 1;
      stack.push_back(static_cast<std::uint32_t>(s));
    }
  }
  while (!stack.empty()) {
    const std::uint32_t s = stack.back();
    stack.pop_back();
    if (on_b(s)) return true;
    const auto& nb = g.neighbors(s);
    for (std::size_t j = 0; j < g.degree(s); ++j) {
      const std::uint32_t t = nb[j];
      if (!seen[t] && member(t)) {
        seen[t] = 1;
        stack.push_back(t);
      }
    }
  }
  return false;
}

bool crossing_of(const Grid& g, std::span<const std::uint8_t> open,
                 std::vector<std::uint32_t>& stack, std::vector<std::uint8_t>& seen) {
  return spans(
      g, [&](std::size_t s) { return open[s] != 0; },
      [&](std::size_t s) { return g.on_left(s); },
      [&](std::size_t s) { return g.on_right(s); }, stack, seen);
}

// Sites of the opposite state that join a cluster touching side A with one
// touching side B. `member` selects the cluster state.
template <typename IsMember, typename OnA, typename OnB>
std::size_t count_bridges(const Grid& g, IsMember member, OnA on_a, OnB on_b,
                          std::vector<std::uint8_t>* mask) {
  const std::size_t sites = g.sites();
  const auto A = static_cast<UnionFind::Index>(sites);
  const auto B = static_cast<UnionFind::Index>(sites + 1);
  UnionFind uf(sites + 2);
  for (std::size_t s = 0; s < sites; ++s) {
    if (!member(s)) continue;
    const auto si = static_cast<UnionFind::Index>(s);
    if (on_a(s)) uf.unite(si, A);
    if (on_b(s)) uf.unite(si, B);
    const auto& nb = g.neighbors(s);
    for (std::size_t j = 0; j < g.degree(s); ++j) {
      if (nb[j] < s && member(nb[j])) uf.unite(si, nb[j]);
    }
  }
  std::size_t count = 0;
  for (std::size_t s = 0; s < sites; ++s) {
    if (member(s)) continue;
    bool reach_a = on_a(s), reach_b = on_b(s);
    const auto& nb = g.neighbors(s);
    for (std::size_t j = 0; j < g.degree(s) && !(reach_a && reach_b); ++j) {
      if (!member(nb[j])) continue;
      reach_a = reach_a || uf.connected(nb[j], A);
      reach_b = reach_b || uf.connected(nb[j], B);
    }
    if (reach_a && reach_b) {
      ++count;
      if (mask) (*mask)[s] = 1;
    }
  }
  return count;
}

std::vector<std::uint8_t> sample_open(std::size_t sites, std::uint64_t key, double p) {
  std::vector<std::uint8_t> open(sites);
  for (std::size_t s = 0; s < sites; ++s) open[s] = rng::counter_uniform(key, s) <= p;
  return open;
}

class CrossingState final : public IncrementalState {
 public:
  explicit CrossingState(const Grid& g)
      : g_(g), uf_(g.sites() + 2), open_(g.sites(), 0) {}

  bool insert(std::size_t s) override {
    open_[s] = 1;
    const auto si = static_cast<UnionFind::Index>(s);
    const auto L = static_cast<UnionFind::Index>(g_.sites());
    if (g_.on_left(s)) uf_.unite(si, L);
    if (g_.on_right(s)) uf_.unite(si, L + 1);
    const auto& nb = g_.neighbors(s);
    for (std::size_t j = 0; j < g_.degree(s); ++j) {
      if (open_[nb[j]]) uf_.unite(si, nb[j]);
    }
    return value();
  }
  bool value() const override {
    const auto L = static_cast<UnionFind::Index>(g_.sites());
    return uf_.connected(L, L + 1);
  }

 private:
  const Grid& g_;
  mutable UnionFind uf_;
  std::vector<std::uint8_t> open_;
};

class CrossingFunction final : public MonotoneFunction {
 public:
  explicit CrossingFunction(std::size_t n) : grid_(n) {}

  std::size_t size() const override { return grid_.sites(); }
  std::string name() const override {
    return "crossing(n=" + std::to_string(grid_.side()) + ")";
  }
  bool evaluate(const BitConfig& w) const override {
    if (w.size() != size()) throw InvalidArgument("crossing: input size mismatch");
    return has_crossing(grid_, w.raw());
  }
  std::unique_ptr<IncrementalState> start() const override {
    return std::make_unique<CrossingState>(grid_);
  }
  std::optional<FlipTime> direct_flip_time(std::span<const double> labels) const override {
    return crossing_flip_time(grid_, labels);
  }
  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override {
    return count_pivotal_sites(grid_, w.raw(), PivotalMethod::kFast, mask);
  }

 private:
  Grid grid_;
};

}  // namespace

// ------------------------------------------------------------------- grid

Grid::Grid(std::size_t n) : n_(n) {
  if (n < 2) throw InvalidArgument("build_lattice: n must be >= 2");
  if (n > 46340) throw InvalidArgument("build_lattice: n too large");
  adjacency_.resize(n * n);
  degree_.assign(n * n, 0);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t s = index(x, y);
      for (const auto& d : kOffsets) {
        const long nx = static_cast<long>(x) + d[0];
        const long ny = static_cast<long>(y) + d[1];
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(n) || ny >= static_cast<long>(n)) {
          continue;
        }
        adjacency_[s][degree_[s]++] = static_cast<std::uint32_t>(
            index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)));
      }
    }
  }
}

Grid build_lattice(std::size_t n) { return Grid(n); }

bool has_crossing(const Grid& grid, std::span<const std::uint8_t> open) {
  if (open.size() != grid.sites()) throw InvalidArgument("has_crossing: size mismatch");
  std::vector<std::uint32_t> stack;
  std::vector<std::uint8_t> seen;
  return crossing_of(grid, open, stack, seen);
}

bool has_crossing(const Grid& grid, const std::function<bool(std::size_t)>& open) {
  std::vector<std::uint8_t> v(grid.sites());
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = open(s);
  return has_crossing(grid, v);
}

std::vector<std::uint8_t> open_sites(std::span<const double> labels, double p) {
  std::vector<std::uint8_t> open(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) open[s] = labels[s] <= p;
  return open;
}

// ------------------------------------------------------------ flip times

FlipTime crossing_flip_time(const Grid& grid, std::span<const double> labels,
                            SweepCounters* counters) {
  const std::size_t sites = grid.sites();
  if (labels.size() != sites) throw InvalidArgument("crossing_flip_time: size mismatch");
  std::vector<std::uint32_t> order(sites);
  std::iota(order.begin(), order.end(), 0U);
  sort_by_label(order, labels);
  UnionFind uf(sites + 2);
  const auto L = static_cast<UnionFind::Index>(sites);
  const auto R = L + 1;
  std::vector<std::uint8_t> open(sites, 0);
  SweepCounters c;
  FlipTime out{std::numeric_limits<double>::quiet_NaN(), std::nullopt};
  for (const auto s : order) {
    open[s] = 1;
    ++c.insertions;
    if (grid.on_left(s)) {
      uf.unite(s, L);
      ++c.union_calls;
    }
    if (grid.on_right(s)) {
      uf.unite(s, R);
      ++c.union_calls;
    }
    const auto& nb = grid.neighbors(s);
    for (std::size_t j = 0; j < grid.degree(s); ++j) {
      if (open[nb[j]]) {
        uf.unite(s, nb[j]);
        ++c.union_calls;
      }
    }
    if (!out.pivotal_bit && uf.connected(L, R)) out = FlipTime{labels[s], s};
  }
  if (counters) *counters = c;
  return out;
}

FlipTime crossing_flip_time_by_search(const Grid& grid, std::span<const double> labels) {
  const std::size_t sites = grid.sites();
  if (labels.size() != sites) throw InvalidArgument("crossing_flip_time: size mismatch");
  std::vector<std::uint32_t> order(sites);
  std::iota(order.begin(), order.end(), 0U);
  sort_by_label(order, labels);
  auto crosses_after = [&](std::size_t k) {
    std::vector<std::uint8_t> open(sites, 0);
    for (std::size_t j = 0; j < k; ++j) open[order[j]] = 1;
    return has_crossing(grid, open);
  };
  std::size_t lo = 0, hi = sites;  // crosses_after(lo) false, crosses_after(hi) true
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (crosses_after(mid) ? hi : lo) = mid;
  }
  const auto s = order[hi - 1];
  return FlipTime{labels[s], s};
}

FunctionPtr crossing_function(std::size_t n) {
  return std::make_shared<CrossingFunction>(n);
}

// -------------------------------------------------------------- pivotals

std::size_t count_pivotal_sites(const Grid& grid, std::span<const std::uint8_t> open,
                                PivotalMethod method, std::vector<std::uint8_t>* mask) {
  if (open.size() != grid.sites()) throw InvalidArgument("count_pivotal_sites: size mismatch");
  if (mask) mask->assign(grid.sites(), 0);
  if (method == PivotalMethod::kBruteForce) {
    std::vector<std::uint32_t> stack;
    std::vector<std::uint8_t> seen;
    std::vector<std::uint8_t> w(open.begin(), open.end());
    const bool base = crossing_of(grid, w, stack, seen);
    std::size_t count = 0;
    for (std::size_t s = 0; s < w.size(); ++s) {
      w[s] ^= 1;
      if (crossing_of(grid, w, stack, seen) != base) {
        ++count;
        if (mask) (*mask)[s] = 1;
      }
      w[s] ^= 1;
    }
    return count;
  }
  if (!has_crossing(grid, open)) {
    // Closed sites joining a left-touching and a right-touching open cluster.
    return count_bridges(
        grid, [&](std::size_t s) { return open[s] != 0; },
        [&](std::size_t s) { return grid.on_left(s); },
        [&](std::size_t s) { return grid.on_right(s); }, mask);
  }
  // Closing an open site breaks every open crossing exactly when it creates
  // a closed bottom-top crossing.
  return count_bridges(
      grid, [&](std::size_t s) { return open[s] == 0; },
      [&](std::size_t s) { return grid.on_bottom(s); },
      [&](std::size_t s) { return grid.on_top(s); }, mask);
}

Estimate estimate_pivotal_count(std::size_t n, std::size_t N, std::uint64_t seed,
                                PivotalMethod method, unsigned workers) {
  if (N == 0) throw InvalidArgument("estimate_pivotal_count: N must be >= 1");
  if (method == PivotalMethod::kBruteForce && n > kBruteForcePivotalCap) {
    throw InvalidArgument("estimate_pivotal_count: brute force is capped at n = " +
                          std::to_string(kBruteForcePivotalCap));
  }
  const Grid grid(n);
  std::vector<double> counts(N);
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto open = sample_open(grid.sites(), rng::stream_key(seed, k), 0.5);
      counts[k] = static_cast<double>(count_pivotal_sites(grid, open, method));
    }
  });
  const auto m = mean_and_stderr(counts);
  return Estimate{m.mean, m.std_error, N};
}

std::string to_string(ScaleChoice c) {
  return c == ScaleChoice::kTheoretical ? "theoretical" : "empirical";
}

ScaleChoice parse_scale_choice(const std::string& s) {
  if (s == "theoretical") return ScaleChoice::kTheoretical;
  if (s == "empirical") return ScaleChoice::kEmpirical;
  throw InvalidArgument("unknown r choice '" + s + "' (theoretical | empirical)");
}

double window_scale(std::size_t n, ScaleChoice choice, std::size_t calibration_N,
                    std::uint64_t seed, unsigned workers) {
  if (n < 2) throw InvalidArgument("window_scale: n must be >= 2");
  if (choice == ScaleChoice::kTheoretical) {
    return std::pow(static_cast<double>(n), -0.75);
  }
  const auto e = estimate_pivotal_count(n, calibration_N, seed, PivotalMethod::kFast, workers);
  if (!(e.value > 0)) throw InvalidArgument("window_scale: no pivotal sites observed");
  return 1.0 / e.value;
}

// ------------------------------------------------------ near-critical

std::vector<double> sample_crossing_flip_times(std::size_t n, std::size_t N,
                                               std::uint64_t seed, unsigned workers) {
  if (N == 0) throw InvalidArgument("sample_crossing_flip_times: N must be >= 1");
  const Grid grid(n);
  std::vector<double> out(N);
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> labels(grid.sites());
    for (std::size_t k = begin; k < end; ++k) {
      fill_uniform_labels(labels, rng::stream_key(seed, k));
      out[k] = crossing_flip_time(grid, labels).value;
    }
  });
  return out;
}

namespace {

void check_lambda(double lambda, double r) {
  if (!std::isfinite(lambda) || !(r > 0) || std::abs(lambda) * r > 0.5 + 1e-15) {
    throw InvalidArgument("near-critical ensemble needs |lambda| r <= 1/2 (lambda = " +
                          std::to_string(lambda) + ", r = " + std::to_string(r) + ")");
  }
}

}  // namespace

std::vector<Estimate> near_critical_crossing_probs(std::size_t n,
                                                   std::span<const double> lambdas,
                                                   double r, std::size_t N,
                                                   std::uint64_t seed, unsigned workers) {
  for (double l : lambdas) check_lambda(l, r);
  const auto times = sample_crossing_flip_times(n, N, seed, workers);
  std::vector<Estimate> out;
  for (double l : lambdas) {
    const double p = 0.5 + l * r;
    std::size_t hits = 0;
    for (double t : times) hits += t <= p;
    out.push_back(bernoulli(hits, N));
  }
  return out;
}

Estimate near_critical_crossing_prob(std::size_t n, double lambda, double r,
                                     std::size_t N, std::uint64_t seed, unsigned workers) {
  const double l[1] = {lambda};
  return near_critical_crossing_probs(n, l, r, N, seed, workers)[0];
}

DualPair near_critical_dual_pair(std::size_t n, double lambda, double r, std::size_t N,
                                 std::uint64_t seed, unsigned workers) {
  check_lambda(lambda, r);
  if (N == 0) throw InvalidArgument("near_critical_dual_pair: N must be >= 1");
  const Grid grid(n);
  const double p = 0.5 + lambda * r;
  std::vector<std::uint8_t> plus(N), minus(N);
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint8_t> dual(grid.sites());
    for (std::size_t k = begin; k < end; ++k) {
      const auto open = sample_open(grid.sites(), rng::stream_key(seed, k), p);
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) dual[grid.index(x, y)] = !open[grid.index(y, x)];
      }
      plus[k] = has_crossing(grid, open);
      minus[k] = has_crossing(grid, dual);
    }
  });
  const auto sum = [](const std::vector<std::uint8_t>& v) {
    return static_cast<std::size_t>(std::count(v.begin(), v.end(), 1));
  };
  return DualPair{bernoulli(sum(plus), N), bernoulli(sum(minus), N)};
}

TailFit tail_exponent_fit(std::span<const double> lambdas, std::span<const double> values) {
  if (lambdas.size() != values.size()) {
    throw InvalidArgument("tail_exponent_fit: lambda and value counts differ");
  }
  TailFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double l = lambdas[i], f = values[i];
    if (!(l > 0)) throw InvalidArgument("tail_exponent_fit: lambda must be positive");
    if (!(f > 0.0)) {
      fit.warnings.push_back("dropped lambda = " + std::to_string(l) +
                             ": estimate is 0 (insufficient Monte Carlo resolution)");
      continue;
    }
    if (!(f < 0.4)) {
      fit.warnings.push_back("dropped lambda = " + std::to_string(l) +
                             ": estimate not below 0.4");
      continue;
    }
    xs.push_back(std::log(l));
    ys.push_back(std::log(-std::log(f)));
  }
  if (xs.size() < 4) {
    throw InvalidArgument("tail_exponent_fit: need at least 4 points with 0 < f < 0.4");
  }
  const double m = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0)) throw InvalidArgument("tail_exponent_fit: lambdas must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    fit.residuals.push_back(e);
    rss += e * e;
  }
  fit.residual_norm = std::sqrt(rss);
  fit.points_used = xs.size();
  return fit;
}

// ------------------------------------------------------------ dynamical

std::vector<Estimate> dynamical_no_crossing_probs(std::size_t n, std::span<const double> ts,
                                                  double r, std::size_t N,
                                                  std::uint64_t seed, unsigned workers) {
  if (N == 0) throw InvalidArgument("dynamical_no_crossing_probs: N must be >= 1");
  if (!(r > 0) || !std::isfinite(r)) throw InvalidArgument("dynamical: r must be positive");
  double horizon = 0;
  for (double t : ts) {
    if (!(t >= 0) || !std::isfinite(t)) throw InvalidArgument("dynamical: t must be >= 0");
    horizon = std::max(horizon, t);
  }
  const Grid grid(n);
  const std::size_t sites = grid.sites();
  const double total_rate = static_cast<double>(sites) * r;
  std::vector<double> first(N);
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> stack;
    std::vector<std::uint32_t> seen(sites, 0);
    std::uint32_t stamp = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const std::uint64_t key = rng::stream_key(seed, k);
      auto open = sample_open(sites, key, 0.5);
      std::vector<std::uint8_t> scratch;
      if (crossing_of(grid, open, stack, scratch)) {
        first[k] = 0.0;
        continue;
      }
      rng::SplitMix64 clock(rng::mix64(key ^ kClockSalt));
      double t = 0;
      first[k] = std::numeric_limits<double>::infinity();
      for (;;) {
        t += clock.exponential() / total_rate;
        if (t > horizon) break;
        const auto s = static_cast<std::uint32_t>(
            std::min<double>(std::floor(clock.uniform() * static_cast<double>(sites)),
                             static_cast<double>(sites - 1)));
        const std::uint8_t state = clock.uniform() < 0.5;
        if (state == open[s]) continue;
        open[s] = state;
        if (!state) continue;  // closing a site never creates a crossing
        // Does the open cluster of s now touch both walls?
        if (++stamp == 0) {
          std::fill(seen.begin(), seen.end(), 0);
          stamp = 1;
        }
        bool left = false, right = false;
        stack.assign(1, s);
        seen[s] = stamp;
        while (!stack.empty() && !(left && right)) {
          const auto u = stack.back();
          stack.pop_back();
          left = left || grid.on_left(u);
          right = right || grid.on_right(u);
          const auto& nb = grid.neighbors(u);
          for (std::size_t j = 0; j < grid.degree(u); ++j) {
            const auto v = nb[j];
            if (open[v] && seen[v] != stamp) {
              seen[v] = stamp;
              stack.push_back(v);
            }
          }
        }
        if (left && right) {
          first[k] = t;
          break;
        }
      }
    }
  });
  std::vector<Estimate> out;
  for (double t : ts) {
    std::size_t hits = 0;
    for (double f : first) hits += f > t;
    out.push_back(bernoulli(hits, N));
  }
  return out;
}

Estimate dynamical_no_crossing_prob(std::size_t n, double t, double r, std::size_t N,
                                    std::uint64_t seed, unsigned workers) {
  const double ts[1] = {t};
  return dynamical_no_crossing_probs(n, ts, r, N, seed, workers)[0];
}

}  // namespace flipscale::percolation
