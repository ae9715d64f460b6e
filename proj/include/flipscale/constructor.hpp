#pragma once

// Monotone functions whose rescaled flip time a_n (T - 1/2) approaches a
// prescribed finitely supported law.
//
// For atoms x_1 < ... < x_k with weights q_i, both constructions are the
// indicator of the union over i of (E_i and F_i), where
//   E_i: the fraction of ones among all n bits is >= 1/2 + x_i / a_n,
//   F_i: a "local" event with probability about q_1 + ... + q_i at p = 1/2.
// The plain construction takes F_i on the first floor(a_n) bits; the
// rotation-invariant one asks for a circular window of length l whose
// integer value (first bit most significant) is at least a threshold y_i.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flipscale/coupling.hpp"
#include "flipscale/montecarlo.hpp"

namespace flipscale {

struct Atom {
  double x = 0.0;
  double q = 0.0;
};

class FiniteMeasure {
 public:
  // Throws InvalidArgument unless x is strictly increasing, every q > 0 and
  // the weights sum to 1 within 1e-12.
  explicit FiniteMeasure(std::vector<Atom> atoms);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double cdf(double x) const;
  // True when no atom sits at x.
  bool continuous_at(double x) const;

 private:
  std::vector<Atom> atoms_;
};

enum class ConstructionMode { kPlain, kTransitive };

struct ScalingReport {
  bool ok = true;
  std::vector<std::string> warnings;
};

// Soft bounds: 1 <= a_n <= sqrt(n) (plain) or log n <= a_n <= sqrt(n)
// (transitive) produce warnings; a_n <= 0, a_n > n or n < 4 throw.
ScalingReport validate_scaling(double a_n, std::size_t n, bool transitive);

// y_i = Phi^{-1}(1 - (q_1 + ... + q_i)); the last entry is -inf.
std::vector<double> gaussian_quantiles(const FiniteMeasure& measure);

// Length-l binary string held as its integer value, first bit most
// significant.
struct ThresholdString {
  std::uint64_t value = 0;
  std::size_t length = 0;
  std::string bits() const;
};

struct ThresholdCalibration {
  ThresholdString y;
  double target = 0.0;
  Estimate achieved;        // estimated P_{1/2}(F(y)) on the calibration batch
  double tolerance = 0.0;   // max(2/n, 3 standard errors)
  bool within_tolerance = true;
  // Set when the budget cannot resolve 2/n, or the estimate misses the
  // tolerance because the empirical law of the window maximum has atoms.
  bool warning = false;
  std::string note;
};

// Per sample k, the largest integer value over the n circular windows of
// length l, with bit i set iff counter_uniform(stream_key(seed, k), i) <= p.
std::vector<std::uint64_t> window_maxima(std::size_t n, std::size_t length,
                                         double p, std::size_t N,
                                         std::uint64_t seed,
                                         unsigned workers = 0);

// Monte Carlo estimate of P_p(some circular window of length l is >= y).
Estimate interval_dominance_prob(const ThresholdString& y, std::size_t n,
                                 double p, std::size_t N, std::uint64_t seed,
                                 unsigned workers = 0);

// Largest y with estimated P_{1/2}(F(y)) >= q, by binary search over
// 0 .. 2^l - 1 on one batch of window maxima.
ThresholdCalibration find_threshold_string(double q, std::size_t n,
                                           std::size_t length, std::size_t N,
                                           std::uint64_t seed,
                                           unsigned workers = 0);

struct ConstructionSpec {
  ConstructionMode mode = ConstructionMode::kPlain;
  std::size_t n = 0;
  double a_n = 0.0;
  std::size_t block = 0;   // plain: floor(a_n)
  std::size_t length = 0;  // transitive: window length floor(2 log2 n)
  std::vector<ThresholdCalibration> thresholds;  // transitive only
  // E_i holds iff the total number of ones is >= global_counts[i]
  // (n + 1 marks an empty event).
  std::vector<std::size_t> global_counts;
  // Plain mode: Gaussian quantiles y_i and the block counts they induce.
  std::vector<double> quantiles;
  std::vector<std::size_t> block_counts;
  std::size_t calibration_N = 0;
  std::uint64_t calibration_seed = 0;
  ScalingReport scaling;
};

class Construction : public MonotoneFunction {
 public:
  std::size_t atom_count() const { return measure_.size(); }
  const FiniteMeasure& measure() const { return measure_; }
  const ConstructionSpec& spec() const { return spec_; }

  virtual bool global_event(std::size_t i, const BitConfig& omega) const = 0;
  virtual bool local_event(std::size_t i, const BitConfig& omega) const = 0;

  // Rescaled flip time a_n (T - 1/2).
  FlipTimeSample sample(std::size_t N, std::uint64_t seed,
                        unsigned workers = 0) const;

 protected:
  Construction(FiniteMeasure measure, ConstructionSpec spec)
      : measure_(std::move(measure)), spec_(std::move(spec)) {}

  FiniteMeasure measure_;
  ConstructionSpec spec_;
};

using ConstructionPtr = std::shared_ptr<const Construction>;

ConstructionPtr build_plain(const FiniteMeasure& measure, std::size_t n,
                            double a_n);

struct TransitiveOptions {
  std::size_t calibration_N = 20000;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

ConstructionPtr build_transitive(const FiniteMeasure& measure, std::size_t n,
                                 double a_n,
                                 const TransitiveOptions& options = {});

// Same function from previously calibrated thresholds (one per atom except
// the last, nonincreasing), e.g. when replaying a stored run.
ConstructionPtr build_transitive(const FiniteMeasure& measure, std::size_t n,
                                 double a_n,
                                 std::vector<std::uint64_t> thresholds);

// floor(2 log2 n).
std::size_t transitive_window_length(std::size_t n);

}  // namespace flipscale
