#pragma once

// Canonical monotone coupling: i.i.d. uniform labels per bit, the
// configuration eta_p = {i : label_i <= p}, and the flip time
// T(f) = min{p : f(eta_p) = 1} of a monotone Boolean function.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flipscale {

class LabelAssignment {
 public:
  // Wraps caller-provided labels; every value must lie in [0, 1].
  explicit LabelAssignment(std::vector<double> labels, std::uint64_t seed = 0);

  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const double> labels() const noexcept { return labels_; }
  double operator[](std::size_t i) const noexcept { return labels_[i]; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::vector<double> labels_;
  std::uint64_t seed_;
};

// n labels of the SplitMix64 counter stream keyed by `seed` (see rng.hpp).
// Throws InvalidArgument for n = 0.
LabelAssignment assign_uniform_labels(std::size_t n, std::uint64_t seed);

// Same values as assign_uniform_labels(out.size(), key), written in place.
void fill_uniform_labels(std::span<double> out, std::uint64_t key);

class BitConfig {
 public:
  BitConfig() = default;
  explicit BitConfig(std::size_t n, bool value = false)
      : bits_(n, value ? 1 : 0) {}
  explicit BitConfig(std::vector<std::uint8_t> bits);

  static BitConfig zeros(std::size_t n) { return BitConfig(n, false); }
  static BitConfig ones(std::size_t n) { return BitConfig(n, true); }
  // Bit i is taken from bit i of `mask` (n <= 64).
  static BitConfig from_mask(std::size_t n, std::uint64_t mask);

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(std::size_t i, bool v) noexcept { bits_[i] = v ? 1 : 0; }
  void flip(std::size_t i) noexcept { bits_[i] ^= 1; }
  std::size_t count() const noexcept;
  std::span<const std::uint8_t> raw() const noexcept { return bits_; }

  BitConfig complement() const;
  // Coordinate-wise order: *this <= other.
  bool dominated_by(const BitConfig& other) const;

  friend bool operator==(const BitConfig&, const BitConfig&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Throws InvalidArgument when p is outside [0, 1].
BitConfig configuration_at(const LabelAssignment& labels, double p);

struct FlipTime {
  double value = 0.0;
  // Index whose insertion switched the output; empty for a constant-one f.
  std::optional<std::size_t> pivotal_bit;
};

// Incremental evaluation state. Starts from the all-zeros input.
class IncrementalState {
 public:
  virtual ~IncrementalState() = default;
  // Sets bit i to one and returns the output afterwards.
  virtual bool insert(std::size_t i) = 0;
  virtual bool value() const = 0;
};

using WitnessList = std::vector<std::vector<std::size_t>>;

class MonotoneFunction {
 public:
  virtual ~MonotoneFunction() = default;

  virtual std::size_t size() const = 0;
  virtual bool evaluate(const BitConfig& omega) const = 0;
  virtual std::string name() const = 0;

  // nullptr when the function has no incremental evaluator.
  virtual std::unique_ptr<IncrementalState> start() const { return nullptr; }

  // Explicit 1-witness list, where the family has a small one.
  virtual std::optional<WitnessList> one_witnesses() const {
    return std::nullopt;
  }

  // Family-specific shortcut for T(f). Must agree exactly with ordered
  // insertion, including the tie-break by index.
  virtual std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const {
    (void)labels;
    return std::nullopt;
  }

  // Number of pivotal bits of omega; optionally marks them in `mask`.
  // The default flips every bit and re-evaluates.
  virtual std::size_t count_pivotal(const BitConfig& omega,
                                    std::vector<std::uint8_t>* mask) const;

  // Symmetry class per bit, used to pool influence estimates. Empty means
  // the family declares no classes.
  virtual std::vector<std::uint32_t> symmetry_classes() const { return {}; }
};

using FunctionPtr = std::shared_ptr<const MonotoneFunction>;

// T(f) for the given labels. Throws NoFlip if f(all ones) = 0 and
// InvalidArgument on a size mismatch. Returns value 0 with no pivotal bit
// when f(all zeros) = 1.
FlipTime flip_time(const MonotoneFunction& f, std::span<const double> labels);
FlipTime flip_time(const MonotoneFunction& f, const LabelAssignment& labels);

// Ordered insertion ignoring direct_flip_time(); binary search over the
// sorted order when the function has no incremental evaluator.
FlipTime flip_time_by_insertion(const MonotoneFunction& f,
                                std::span<const double> labels);

// min over witnesses W of max_{i in W} label_i.
FlipTime flip_time_via_witnesses(const WitnessList& witnesses,
                                 const LabelAssignment& labels);

// f^(omega) = 1 - f(1 - omega).
FunctionPtr reverse(FunctionPtr f);

// Sorts `indices` by (label, index).
void sort_by_label(std::span<std::uint32_t> indices,
                   std::span<const double> labels);

}  // namespace flipscale
