#pragma once

// Batch sampling of flip times, empirical distribution functions, KS/DKW
// comparison and influence estimation.
//
// Sample k of a batch always uses the label stream
// rng::stream_key(base_seed, k), so results do not depend on the number of
// worker threads or on scheduling.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flipscale/coupling.hpp"
#include "flipscale/families.hpp"

namespace flipscale {

struct FlipTimeSample {
  std::vector<double> values;
  std::vector<std::uint64_t> stream_keys;  // label stream of each draw
  std::size_t n = 0;                       // bit count
  std::optional<FamilySpec> family;        // empty for ad-hoc functions
  std::uint64_t base_seed = 0;
  std::optional<double> a_n;  // set once rescaled
  std::optional<double> b_n;
};

// workers = 0 uses the hardware concurrency.
FlipTimeSample sample_flip_times(const FamilySpec& spec, std::size_t N,
                                 std::uint64_t base_seed, unsigned workers = 0);
FlipTimeSample sample_flip_times(const MonotoneFunction& f, std::size_t N,
                                 std::uint64_t base_seed, unsigned workers = 0);

// x -> a (x - b). Throws InvalidArgument unless a > 0.
FlipTimeSample rescale(const FlipTimeSample& sample, double a, double b);
// Inverse map x -> x / a + b, clearing the recorded scaling.
FlipTimeSample unscale(const FlipTimeSample& sample);

class EmpiricalCdf {
 public:
  // Throws InvalidArgument for an empty sample.
  explicit EmpiricalCdf(std::vector<double> values);

  std::size_t size() const noexcept { return sorted_.size(); }
  std::span<const double> sorted() const noexcept { return sorted_; }
  // Fraction of the sample <= x.
  double operator()(double x) const;
  // Fraction of the sample < x.
  double below(double x) const;

 private:
  std::vector<double> sorted_;
};

// sup |F_hat - F| checked on both sides of every jump of F_hat.
double ks_distance(const EmpiricalCdf& ecdf,
                   const std::function<double(double)>& cdf);
double ks_distance(const EmpiricalCdf& ecdf, const AnalyticLimit& limit);
double ks_two_sample(const EmpiricalCdf& a, const EmpiricalCdf& b);

// sqrt(log(2 / (1 - confidence)) / (2N)).
double dkw_bound(std::size_t N, double confidence);

// Pairwise (cascade) summation; the result depends only on the order of
// the input.
double pairwise_sum(std::span<const double> values);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t N = 0;
};

struct MeanStats {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanStats mean_and_stderr(std::span<const double> values);

// P_p(f = 1) at every p, read off one batch of flip times (common random
// numbers across p).
std::vector<Estimate> estimate_probabilities(const MonotoneFunction& f,
                                             std::span<const double> ps,
                                             std::size_t N,
                                             std::uint64_t base_seed,
                                             unsigned workers = 0);

struct InfluenceEstimate {
  double p = 0.0;
  std::size_t N = 0;
  Estimate total;        // expected number of pivotal bits
  Estimate probability;  // P_p(f = 1)
  Estimate variance;     // Var_p(f) = P (1 - P)
  // Mean influence of one bit in each declared symmetry class.
  std::vector<double> class_influence;
  std::vector<double> class_stderr;
  std::vector<std::size_t> class_size;
};

// Configurations are drawn with bit i of sample k set iff
// counter_uniform(stream_key(base_seed, k), i) <= p.
InfluenceEstimate estimate_influence(const FamilySpec& spec, double p,
                                     std::size_t N, std::uint64_t base_seed,
                                     unsigned workers = 0);
InfluenceEstimate estimate_influence(const MonotoneFunction& f, double p,
                                     std::size_t N, std::uint64_t base_seed,
                                     unsigned workers = 0);

// Runs body(k) for k in [0, count) on up to `workers` threads and rethrows
// the first exception. body receives contiguous index ranges.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

unsigned resolve_workers(unsigned workers);

}  // namespace flipscale
