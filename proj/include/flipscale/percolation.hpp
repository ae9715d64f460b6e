#pragma once

// Site percolation on an n x n rhombus of the triangular lattice, with
// left-right crossings, their flip times, pivotal sites, the near-critical
// ensemble and a dynamical (exponential clock) version.
//
// Site (x, y), 0 <= x, y < n, has index y * n + x. Its neighbours are the
// in-range sites among (x +- 1, y), (x, y +- 1), (x + 1, y - 1) and
// (x - 1, y + 1). The left wall is x = 0, the right wall x = n - 1, the
// bottom y = 0 and the top y = n - 1. On this board exactly one of "open
// left-right crossing" and "closed bottom-top crossing" occurs, so the
// crossing probability at p = 1/2 is exactly 1/2.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flipscale/coupling.hpp"
#include "flipscale/montecarlo.hpp"

namespace flipscale::percolation {

class Grid {
 public:
  explicit Grid(std::size_t n);

  std::size_t side() const noexcept { return n_; }
  std::size_t sites() const noexcept { return n_ * n_; }
  std::size_t index(std::size_t x, std::size_t y) const noexcept { return y * n_ + x; }
  std::size_t x_of(std::size_t s) const noexcept { return s % n_; }
  std::size_t y_of(std::size_t s) const noexcept { return s / n_; }

  bool on_left(std::size_t s) const noexcept { return x_of(s) == 0; }
  bool on_right(std::size_t s) const noexcept { return x_of(s) + 1 == n_; }
  bool on_bottom(std::size_t s) const noexcept { return y_of(s) == 0; }
  bool on_top(std::size_t s) const noexcept { return y_of(s) + 1 == n_; }

  // Neighbours of s; the first `degree(s)` entries are valid.
  const std::array<std::uint32_t, 6>& neighbors(std::size_t s) const noexcept {
    return adjacency_[s];
  }
  std::size_t degree(std::size_t s) const noexcept { return degree_[s]; }

 private:
  std::size_t n_;
  std::vector<std::array<std::uint32_t, 6>> adjacency_;
  std::vector<std::uint8_t> degree_;
};

// Throws InvalidArgument for n < 2.
Grid build_lattice(std::size_t n);

// Open left-right crossing. `open` has one entry per site.
bool has_crossing(const Grid& grid, std::span<const std::uint8_t> open);
bool has_crossing(const Grid& grid, const std::function<bool(std::size_t)>& open);

// Sites open iff label <= p.
std::vector<std::uint8_t> open_sites(std::span<const double> labels, double p);

struct SweepCounters {
  std::size_t insertions = 0;
  std::size_t union_calls = 0;  // neighbour and wall unions attempted
};

// Inserts every site in (label, index) order into a union-find with two
// wall nodes and returns the label at which the walls first connect.
FlipTime crossing_flip_time(const Grid& grid, std::span<const double> labels,
                            SweepCounters* counters = nullptr);

// Binary search over the sorted labels with has_crossing; an oracle.
FlipTime crossing_flip_time_by_search(const Grid& grid,
                                      std::span<const double> labels);

// The crossing indicator as a MonotoneFunction on n^2 bits.
FunctionPtr crossing_function(std::size_t n);

enum class PivotalMethod { kBruteForce, kFast };

// Sites whose flip changes has_crossing.
std::size_t count_pivotal_sites(const Grid& grid,
                                std::span<const std::uint8_t> open,
                                PivotalMethod method,
                                std::vector<std::uint8_t>* mask = nullptr);

inline constexpr std::size_t kBruteForcePivotalCap = 128;

// Mean pivotal count at p = 1/2; site s of sample k is open iff
// counter_uniform(stream_key(seed, k), s) <= 1/2. The brute-force path
// throws InvalidArgument above kBruteForcePivotalCap.
Estimate estimate_pivotal_count(std::size_t n, std::size_t N, std::uint64_t seed,
                                PivotalMethod method = PivotalMethod::kFast,
                                unsigned workers = 0);

enum class ScaleChoice { kTheoretical, kEmpirical };

std::string to_string(ScaleChoice c);
ScaleChoice parse_scale_choice(const std::string& s);

// r(n): n^(-3/4), or 1 / (estimated mean pivotal count at p = 1/2).
double window_scale(std::size_t n, ScaleChoice choice,
                    std::size_t calibration_N = 2000,
                    std::uint64_t seed = 0x5eed, unsigned workers = 0);

// Crossing flip times of N label arrays (stream_key(seed, k) per sample).
std::vector<double> sample_crossing_flip_times(std::size_t n, std::size_t N,
                                               std::uint64_t seed,
                                               unsigned workers = 0);

// P(crossing) at p = 1/2 + lambda r for every lambda, all read off one
// batch of flip times. Throws InvalidArgument when |lambda| r > 1/2.
std::vector<Estimate> near_critical_crossing_probs(std::size_t n,
                                                   std::span<const double> lambdas,
                                                   double r, std::size_t N,
                                                   std::uint64_t seed,
                                                   unsigned workers = 0);
Estimate near_critical_crossing_prob(std::size_t n, double lambda, double r,
                                     std::size_t N, std::uint64_t seed,
                                     unsigned workers = 0);

// Paired estimator: `plus` counts open crossings of the lambda ensemble,
// `minus` open crossings of its transposed colour swap, which is a draw of
// the -lambda ensemble. plus + minus = 1 on every sample.
struct DualPair {
  Estimate plus;
  Estimate minus;
};
DualPair near_critical_dual_pair(std::size_t n, double lambda, double r,
                                 std::size_t N, std::uint64_t seed,
                                 unsigned workers = 0);

struct TailFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_norm = 0.0;
  std::vector<double> residuals;
  std::size_t points_used = 0;
  std::vector<std::string> warnings;
};

// Least squares of log(-log f) on log lambda, for lambda > 0 and values f
// of P(crossing) at -lambda. Points with f outside (0, 0.4) are dropped
// with a warning; fewer than 4 remaining points throw InvalidArgument.
TailFit tail_exponent_fit(std::span<const double> lambdas,
                          std::span<const double> values);

// Start from the p = 1/2 configuration; every site rings at rate r and is
// then reset to open with probability 1/2. g(t) is the probability that
// no crossing is present at any time in [0, t]. Each run is simulated up to
// max(ts) and stops at its first crossing.
std::vector<Estimate> dynamical_no_crossing_probs(std::size_t n,
                                                  std::span<const double> ts,
                                                  double r, std::size_t N,
                                                  std::uint64_t seed,
                                                  unsigned workers = 0);
Estimate dynamical_no_crossing_prob(std::size_t n, double t, double r,
                                    std::size_t N, std::uint64_t seed,
                                    unsigned workers = 0);

}  // namespace flipscale::percolation
