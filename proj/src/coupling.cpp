#include "flipscale/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "flipscale/errors.hpp"
#include "flipscale/rng.hpp"

namespace flipscale {

LabelAssignment::LabelAssignment(std::vector<double> labels, std::uint64_t seed)
    : labels_(std::move(labels)), seed_(seed) {
  if (labels_.empty()) throw InvalidArgument("label assignment needs n >= 1");
  for (double v : labels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("labels must lie in [0, 1]");
    }
  }
}

void fill_uniform_labels(std::span<double> out, std::uint64_t key) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = rng::counter_uniform(key, i);
  }
}

LabelAssignment assign_uniform_labels(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("assign_uniform_labels: n must be >= 1");
  std::vector<double> labels(n);
  fill_uniform_labels(labels, seed);
  return LabelAssignment(std::move(labels), seed);
}

BitConfig::BitConfig(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) b = b ? 1 : 0;
}

BitConfig BitConfig::from_mask(std::size_t n, std::uint64_t mask) {
  BitConfig c(n);
  for (std::size_t i = 0; i < n && i < 64; ++i) c.set(i, (mask >> i) & 1U);
  return c;
}

std::size_t BitConfig::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BitConfig BitConfig::complement() const {
  BitConfig c(*this);
  for (auto& b : c.bits_) b ^= 1;
  return c;
}

bool BitConfig::dominated_by(const BitConfig& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] > other.bits_[i]) return false;
  }
  return true;
}

BitConfig configuration_at(const LabelAssignment& labels, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("configuration_at: p must lie in [0, 1]");
  }
  BitConfig c(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) c.set(i, labels[i] <= p);
  return c;
}

std::size_t MonotoneFunction::count_pivotal(
    const BitConfig& omega, std::vector<std::uint8_t>* mask) const {
  const bool base = evaluate(omega);
  BitConfig w(omega);
  std::size_t count = 0;
  if (mask) mask->assign(size(), 0);
  for (std::size_t i = 0; i < size(); ++i) {
    w.flip(i);
    if (evaluate(w) != base) {
      ++count;
      if (mask) (*mask)[i] = 1;
    }
    w.flip(i);
  }
  return count;
}

namespace {

bool label_less(std::span<const double> labels, std::uint32_t a,
                std::uint32_t b) {
  return labels[a] < labels[b] || (labels[a] == labels[b] && a < b);
}

void insertion_sort(std::span<std::uint32_t> idx,
                    std::span<const double> labels) {
  for (std::size_t i = 1; i < idx.size(); ++i) {
    const std::uint32_t v = idx[i];
    std::size_t j = i;
    while (j > 0 && label_less(labels, v, idx[j - 1])) {
      idx[j] = idx[j - 1];
      --j;
    }
    idx[j] = v;
  }
}

}  // namespace

void sort_by_label(std::span<std::uint32_t> indices,
                   std::span<const double> labels) {
  const std::size_t k = indices.size();
  if (k < 256) {
    std::sort(indices.begin(), indices.end(),
              [&](auto a, auto b) { return label_less(labels, a, b); });
    return;
  }
  // Bucket sort on the observed range; labels are close to uniform there,
  // so buckets hold O(1) entries on average.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto i : indices) {
    lo = std::min(lo, labels[i]);
    hi = std::max(hi, labels[i]);
  }
  if (!(hi > lo)) {
    std::sort(indices.begin(), indices.end());
    return;
  }
  const double scale = static_cast<double>(k) / (hi - lo);
  auto bucket_of = [&](std::uint32_t i) {
    auto b = static_cast<std::size_t>((labels[i] - lo) * scale);
    return std::min(b, k - 1);
  };
  std::vector<std::uint32_t> start(k + 1, 0);
  for (auto i : indices) ++start[bucket_of(i) + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<std::uint32_t> out(k);
  for (auto i : indices) out[start[bucket_of(i)]++] = i;
  std::copy(out.begin(), out.end(), indices.begin());
  // After the scatter start[b] is the end of bucket b.
  std::size_t begin = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t end = start[b];
    if (end - begin > 1) {
      insertion_sort(indices.subspan(begin, end - begin), labels);
    }
    begin = end;
  }
}

namespace {

void check_size(const MonotoneFunction& f, std::span<const double> labels) {
  if (labels.size() != f.size()) {
    throw InvalidArgument("flip_time: label count " +
                          std::to_string(labels.size()) +
                          " does not match function size " +
                          std::to_string(f.size()));
  }
}

FlipTime no_flip_error(const MonotoneFunction& f) {
  throw NoFlip("flip_time: " + f.name() + " is constant zero");
}

// Feeds bits in label order, in passes over growing label cutoffs so that
// early flips only pay for a scan and a short sort.
FlipTime insert_in_order(const MonotoneFunction& f,
                         std::span<const double> labels,
                         IncrementalState& state) {
  const std::size_t n = labels.size();
  std::vector<std::uint32_t> batch;
  double below = -std::numeric_limits<double>::infinity();
  double cutoff = std::min(1.0, 64.0 / static_cast<double>(n));
  for (;;) {
    const bool last = cutoff >= 1.0;
    batch.clear();
    for (std::uint32_t i = 0; i < n; ++i) {
      const double v = labels[i];
      if (v > below && (last || v <= cutoff)) batch.push_back(i);
    }
    sort_by_label(batch, labels);
    for (auto i : batch) {
      if (state.insert(i)) return FlipTime{labels[i], i};
    }
    if (last) break;
    below = cutoff;
    cutoff = std::min(1.0, cutoff * 16.0);
  }
  return no_flip_error(f);
}

FlipTime binary_search_order(const MonotoneFunction& f,
                             std::span<const double> labels) {
  const std::size_t n = labels.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  sort_by_label(order, labels);
  auto prefix = [&](std::size_t k) {
    BitConfig w(n);
    for (std::size_t j = 0; j < k; ++j) w.set(order[j], true);
    return w;
  };
  if (!f.evaluate(prefix(n))) return no_flip_error(f);
  // Smallest k with f(first k bits on) = 1; k >= 1 here.
  std::size_t lo = 0;  // f(prefix(lo)) == 0
  std::size_t hi = n;  // f(prefix(hi)) == 1
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (f.evaluate(prefix(mid))) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const std::uint32_t bit = order[hi - 1];
  return FlipTime{labels[bit], bit};
}

}  // namespace

FlipTime flip_time_by_insertion(const MonotoneFunction& f,
                                std::span<const double> labels) {
  check_size(f, labels);
  if (auto state = f.start()) {
    if (state->value()) return FlipTime{0.0, std::nullopt};
    return insert_in_order(f, labels, *state);
  }
  if (f.evaluate(BitConfig::zeros(f.size()))) return FlipTime{0.0, std::nullopt};
  return binary_search_order(f, labels);
}

FlipTime flip_time(const MonotoneFunction& f, std::span<const double> labels) {
  check_size(f, labels);
  if (auto t = f.direct_flip_time(labels)) return *t;
  return flip_time_by_insertion(f, labels);
}

FlipTime flip_time(const MonotoneFunction& f, const LabelAssignment& labels) {
  return flip_time(f, labels.labels());
}

FlipTime flip_time_via_witnesses(const WitnessList& witnesses,
                                 const LabelAssignment& labels) {
  if (witnesses.empty()) {
    throw NoFlip("flip_time_via_witnesses: empty witness list");
  }
  FlipTime best{std::numeric_limits<double>::infinity(), std::nullopt};
  for (const auto& w : witnesses) {
    if (w.empty()) return FlipTime{0.0, std::nullopt};
    std::size_t arg = w.front();
    for (auto i : w) {
      if (i >= labels.size()) {
        throw InvalidArgument("flip_time_via_witnesses: index out of range");
      }
      if (labels[i] > labels[arg] || (labels[i] == labels[arg] && i > arg)) {
        arg = i;
      }
    }
    const double v = labels[arg];
    if (v < best.value ||
        (v == best.value && best.pivotal_bit && arg < *best.pivotal_bit)) {
      best = FlipTime{v, arg};
    }
  }
  return best;
}

namespace {

class Reversed final : public MonotoneFunction {
 public:
  explicit Reversed(FunctionPtr inner) : inner_(std::move(inner)) {}

  std::size_t size() const override { return inner_->size(); }
  bool evaluate(const BitConfig& omega) const override {
    return !inner_->evaluate(omega.complement());
  }
  std::string name() const override { return "reverse(" + inner_->name() + ")"; }
  std::vector<std::uint32_t> symmetry_classes() const override {
    return inner_->symmetry_classes();
  }

 private:
  FunctionPtr inner_;
};

}  // namespace

FunctionPtr reverse(FunctionPtr f) {
  if (!f) throw InvalidArgument("reverse: null function");
  return std::make_shared<Reversed>(std::move(f));
}

}  // namespace flipscale
