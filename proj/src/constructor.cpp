#include "flipscale/constructor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "flipscale/errors.hpp"
#include "flipscale/normal.hpp"
#include "flipscale/rng.hpp"

namespace flipscale {

namespace {

using Event = std::pair<double, std::uint32_t>;

constexpr Event kNever{std::numeric_limits<double>::infinity(), 0};
constexpr Event kAlways{-std::numeric_limits<double>::infinity(), 0};

// Smallest count c with c / size >= fraction, clamped to [0, size + 1];
// size + 1 means the event is empty.
std::size_t count_threshold(double fraction, std::size_t size) {
  if (std::isnan(fraction)) throw InvalidArgument("threshold fraction is NaN");
  if (fraction <= 0.0) return 0;
  if (fraction > 1.0) return size + 1;
  const double c = std::ceil(fraction * static_cast<double>(size) - 1e-9);
  return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(size)));
}

// Event of the k-th inserted bit among labels[first, first + count).
Event kth_event(std::span<const double> labels, std::size_t first,
                std::size_t count, std::size_t k) {
  if (k == 0) return kAlways;
  if (k > count) return kNever;
  std::vector<double> copy(labels.begin() + static_cast<long>(first),
                           labels.begin() + static_cast<long>(first + count));
  std::nth_element(copy.begin(), copy.begin() + static_cast<long>(k - 1), copy.end());
  const double v = copy[k - 1];
  std::size_t below = 0;
  for (std::size_t i = first; i < first + count; ++i) below += labels[i] < v;
  std::size_t need = k - below;
  for (std::size_t i = first; i < first + count; ++i) {
    if (labels[i] == v && --need == 0) return {v, static_cast<std::uint32_t>(i)};
  }
  return {v, static_cast<std::uint32_t>(first)};
}

FlipTime finish(const Event& e, const MonotoneFunction& f) {
  if (e == kNever) throw NoFlip("flip_time: " + f.name() + " is constant zero");
  if (e.first == -std::numeric_limits<double>::infinity()) {
    return FlipTime{0.0, std::nullopt};
  }
  return FlipTime{e.first, e.second};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ------------------------------------------------------------------ plain

class PlainConstruction final : public Construction {
 public:
  PlainConstruction(FiniteMeasure measure, ConstructionSpec spec)
      : Construction(std::move(measure), std::move(spec)) {
    const auto y = gaussian_quantiles(measure_);
    for (std::size_t i = 0; i < measure_.size(); ++i) {
      global_.push_back(
          count_threshold(0.5 + measure_.atoms()[i].x / spec_.a_n, spec_.n));
      block_.push_back(count_threshold(
          0.5 + y[i] / (2.0 * std::sqrt(spec_.a_n)), spec_.block));
    }
    spec_.global_counts = global_;
    spec_.quantiles = y;
    spec_.block_counts = block_;
  }

  std::size_t size() const override { return spec_.n; }

  std::string name() const override {
    return "plain-construction(n=" + std::to_string(spec_.n) +
           ", a_n=" + fmt(spec_.a_n) + ", k=" + std::to_string(atom_count()) + ")";
  }

  bool evaluate(const BitConfig& w) const override {
    const auto [total, head] = counts(w);
    return accept(total, head);
  }

  bool global_event(std::size_t i, const BitConfig& w) const override {
    return counts(w).first >= global_.at(i);
  }
  bool local_event(std::size_t i, const BitConfig& w) const override {
    return counts(w).second >= block_.at(i);
  }

  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      explicit S(const PlainConstruction& f) : f_(f) {}
      bool insert(std::size_t i) override {
        ++total_;
        if (i < f_.spec_.block) ++head_;
        return value();
      }
      bool value() const override { return f_.accept(total_, head_); }

     private:
      const PlainConstruction& f_;
      std::size_t total_ = 0, head_ = 0;
    };
    return std::make_unique<S>(*this);
  }

  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    Event best = kNever;
    for (std::size_t i = 0; i < atom_count(); ++i) {
      const Event local = kth_event(labels, 0, spec_.block, block_[i]);
      if (local == kNever) continue;
      const Event global = kth_event(labels, 0, spec_.n, global_[i]);
      best = std::min(best, std::max(local, global));
    }
    return finish(best, *this);
  }

  std::vector<std::uint32_t> symmetry_classes() const override {
    std::vector<std::uint32_t> c(spec_.n, 1);
    std::fill(c.begin(), c.begin() + static_cast<long>(spec_.block), 0);
    return c;
  }

 private:
  std::pair<std::size_t, std::size_t> counts(const BitConfig& w) const {
    if (w.size() != spec_.n) throw InvalidArgument("construction: input size mismatch");
    std::size_t head = 0;
    for (std::size_t i = 0; i < spec_.block; ++i) head += w[i];
    return {w.count(), head};
  }

  bool accept(std::size_t total, std::size_t head) const {
    for (std::size_t i = 0; i < global_.size(); ++i) {
      if (total >= global_[i] && head >= block_[i]) return true;
    }
    return false;
  }

  std::vector<std::size_t> global_;  // E_i: total ones >= global_[i]
  std::vector<std::size_t> block_;   // F_i: ones in the first block >= block_[i]
};

// ------------------------------------------------------------- transitive

class TransitiveConstruction final : public Construction {
 public:
  TransitiveConstruction(FiniteMeasure measure, ConstructionSpec spec)
      : Construction(std::move(measure), std::move(spec)) {
    for (std::size_t i = 0; i < measure_.size(); ++i) {
      global_.push_back(
          count_threshold(0.5 + measure_.atoms()[i].x / spec_.a_n, spec_.n));
      local_.push_back(i < spec_.thresholds.size() ? spec_.thresholds[i].y.value : 0);
    }
    spec_.global_counts = global_;
  }

  std::size_t size() const override { return spec_.n; }

  std::string name() const override {
    return "transitive-construction(n=" + std::to_string(spec_.n) +
           ", a_n=" + fmt(spec_.a_n) + ", l=" + std::to_string(spec_.length) +
           ", k=" + std::to_string(atom_count()) + ")";
  }

  bool evaluate(const BitConfig& w) const override {
    check(w);
    return accept(w.count(), window_max(w));
  }

  bool global_event(std::size_t i, const BitConfig& w) const override {
    check(w);
    return w.count() >= global_.at(i);
  }
  bool local_event(std::size_t i, const BitConfig& w) const override {
    check(w);
    return window_max(w) >= local_.at(i);
  }

  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      explicit S(const TransitiveConstruction& f)
          : f_(f), windows_(f.spec_.n, 0) {}
      bool insert(std::size_t i) override {
        const std::size_t n = f_.spec_.n, l = f_.spec_.length;
        ++total_;
        // Bit i is at offset t of the window starting at i - t.
        for (std::size_t t = 0; t < l; ++t) {
          const std::size_t s = (i + n - t) % n;
          windows_[s] |= std::uint64_t{1} << (l - 1 - t);
          max_ = std::max(max_, windows_[s]);
        }
        return value();
      }
      bool value() const override { return f_.accept(total_, max_); }

     private:
      const TransitiveConstruction& f_;
      std::vector<std::uint64_t> windows_;
      std::size_t total_ = 0;
      std::uint64_t max_ = 0;
    };
    return std::make_unique<S>(*this);
  }

  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    Event best = kNever;
    for (std::size_t i = 0; i < atom_count(); ++i) {
      const Event global = kth_event(labels, 0, spec_.n, global_[i]);
      if (global == kNever || !(global < best)) continue;
      best = std::min(best, std::max(global, dominance_event(labels, local_[i])));
    }
    return finish(best, *this);
  }

  std::vector<std::uint32_t> symmetry_classes() const override {
    return std::vector<std::uint32_t>(spec_.n, 0);
  }

 private:
  void check(const BitConfig& w) const {
    if (w.size() != spec_.n) throw InvalidArgument("construction: input size mismatch");
  }

  std::uint64_t window_max(const BitConfig& w) const {
    const std::size_t n = spec_.n, l = spec_.length;
    const std::uint64_t mask = l == 64 ? ~0ULL : (std::uint64_t{1} << l) - 1;
    std::uint64_t v = 0;
    for (std::size_t t = 0; t < l; ++t) v = (v << 1) | w[t % n];
    std::uint64_t best = v;
    for (std::size_t s = 1; s < n; ++s) {
      v = ((v << 1) & mask) | w[(s + l - 1) % n];
      best = std::max(best, v);
    }
    return best;
  }

  bool accept(std::size_t total, std::uint64_t max_window) const {
    for (std::size_t i = 0; i < global_.size(); ++i) {
      if (total >= global_[i] && max_window >= local_[i]) return true;
    }
    return false;
  }

  // First insertion event after which some window reads >= y. A window x
  // is >= y iff it covers every one of y, or for some position j with
  // y_j = 0 it has x_j = 1 and covers the ones of y before j.
  Event dominance_event(std::span<const double> labels, std::uint64_t y) const {
    if (y == 0) return kAlways;
    const std::size_t n = spec_.n, l = spec_.length;
    Event best = kNever;
    for (std::size_t s = 0; s < n; ++s) {
      Event prefix = kAlways;
      for (std::size_t t = 0; t < l; ++t) {
        const auto b = static_cast<std::uint32_t>((s + t) % n);
        const Event e{labels[b], b};
        if ((y >> (l - 1 - t)) & 1U) {
          prefix = std::max(prefix, e);
          if (!(prefix < best)) break;  // later candidates are no earlier
        } else {
          best = std::min(best, std::max(prefix, e));
        }
      }
      best = std::min(best, prefix);
    }
    return best;
  }

  std::vector<std::size_t> global_;
  std::vector<std::uint64_t> local_;  // F_i: some window >= local_[i]
};

ThresholdCalibration calibrate(std::span<const std::uint64_t> sorted_maxima,
                               double q, std::size_t n, std::size_t length) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidArgument("find_threshold_string: q must lie in (0, 1)");
  }
  const std::size_t N = sorted_maxima.size();
  auto frequency = [&](std::uint64_t y) {
    const auto it = std::lower_bound(sorted_maxima.begin(), sorted_maxima.end(), y);
    return static_cast<double>(sorted_maxima.end() - it) / static_cast<double>(N);
  };
  ThresholdCalibration out;
  out.target = q;
  out.y.length = length;
  if ((1.0 - q) * static_cast<double>(N) < 1.0) {
    // Not one sample of the batch may fail F(y): only y = 0 is supported.
    out.y.value = 0;
    out.note = "q too close to 1 for the batch size; using the all-zeros string";
  } else {
    std::uint64_t lo = 0;                           // frequency(lo) >= q
    std::uint64_t hi = std::uint64_t{1} << length;  // frequency(hi) = 0 < q
    while (hi - lo > 1) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      if (frequency(mid) >= q) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out.y.value = lo;
  }
  const double P = frequency(out.y.value);
  out.achieved = Estimate{P, std::sqrt(P * (1 - P) / static_cast<double>(N)), N};
  const double resolution = 2.0 / static_cast<double>(n);
  out.tolerance = std::max(resolution, 3 * out.achieved.std_error);
  out.within_tolerance = std::abs(P - q) <= out.tolerance;
  if (3 * out.achieved.std_error > resolution) {
    out.warning = true;
    if (!out.note.empty()) out.note += "; ";
    out.note += "calibration budget N=" + std::to_string(N) +
                " cannot resolve 2/n; tolerance is 3 standard errors";
  }
  if (!out.within_tolerance) {
    out.warning = true;
    if (!out.note.empty()) out.note += "; ";
    out.note += "estimated probability misses the target by more than the tolerance";
  }
  return out;
}

void check_length(std::size_t n, std::size_t length) {
  if (length == 0 || length > 63 || length > n) {
    throw InvalidArgument("window length must satisfy 1 <= l <= min(n, 63)");
  }
}

}  // namespace

// ---------------------------------------------------------------- measure

FiniteMeasure::FiniteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw InvalidArgument("FiniteMeasure: no atoms");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const auto& a = atoms_[i];
    if (!std::isfinite(a.x)) throw InvalidArgument("FiniteMeasure: atom location must be finite");
    if (!(a.q > 0.0)) throw InvalidArgument("FiniteMeasure: weights must be positive");
    if (i > 0 && !(atoms_[i - 1].x < a.x)) {
      throw InvalidArgument("FiniteMeasure: atom locations must be strictly increasing");
    }
    total += a.q;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("FiniteMeasure: weights sum to " + fmt(total) + ", not 1");
  }
}

double FiniteMeasure::cdf(double x) const {
  double s = 0.0;
  for (const auto& a : atoms_) {
    if (a.x <= x) s += a.q;
  }
  return std::min(s, 1.0);
}

bool FiniteMeasure::continuous_at(double x) const {
  return std::none_of(atoms_.begin(), atoms_.end(),
                      [&](const Atom& a) { return a.x == x; });
}

// ---------------------------------------------------------------- scaling

ScalingReport validate_scaling(double a_n, std::size_t n, bool transitive) {
  if (n < 4) throw InvalidArgument("validate_scaling: n must be >= 4");
  if (!(a_n > 0.0) || !std::isfinite(a_n)) {
    throw InvalidArgument("validate_scaling: a_n must be positive");
  }
  const double nd = static_cast<double>(n);
  if (a_n > nd) throw InvalidArgument("validate_scaling: a_n = " + fmt(a_n) + " exceeds n");
  ScalingReport r;
  const double upper = std::sqrt(nd);
  const double lower = transitive ? std::log(nd) : 1.0;
  if (a_n > upper) {
    r.ok = false;
    r.warnings.push_back("a_n = " + fmt(a_n) + " is above sqrt(n) = " + fmt(upper) +
                         " (upper constraint)");
  }
  if (a_n < lower) {
    r.ok = false;
    r.warnings.push_back("a_n = " + fmt(a_n) + " is below " +
                         (transitive ? "log n = " : "1 = ") + fmt(lower) +
                         " (lower constraint)");
  }
  return r;
}

std::vector<double> gaussian_quantiles(const FiniteMeasure& measure) {
  std::vector<double> y;
  double cumulative = 0.0;
  for (std::size_t i = 0; i + 1 < measure.size(); ++i) {
    cumulative += measure.atoms()[i].q;
    y.push_back(normal_quantile(1.0 - cumulative));
  }
  y.push_back(-std::numeric_limits<double>::infinity());
  return y;
}

std::string ThresholdString::bits() const {
  std::string s(length, '0');
  for (std::size_t t = 0; t < length; ++t) {
    if ((value >> (length - 1 - t)) & 1U) s[t] = '1';
  }
  return s;
}

std::size_t transitive_window_length(std::size_t n) {
  if (n < 2) throw InvalidArgument("transitive_window_length: n must be >= 2");
  return static_cast<std::size_t>(
      std::floor(2.0 * std::log2(static_cast<double>(n)) + 1e-12));
}

// ---------------------------------------------------------------- windows

std::vector<std::uint64_t> window_maxima(std::size_t n, std::size_t length,
                                         double p, std::size_t N,
                                         std::uint64_t seed, unsigned workers) {
  check_length(n, length);
  if (N == 0) throw InvalidArgument("window_maxima: N must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("window_maxima: p must lie in [0, 1]");
  const std::uint64_t mask = (std::uint64_t{1} << length) - 1;
  std::vector<std::uint64_t> out(N);
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint8_t> bits(n);
    for (std::size_t k = begin; k < end; ++k) {
      const std::uint64_t key = rng::stream_key(seed, k);
      for (std::size_t i = 0; i < n; ++i) bits[i] = rng::counter_uniform(key, i) <= p;
      std::uint64_t v = 0;
      for (std::size_t t = 0; t < length; ++t) v = (v << 1) | bits[t % n];
      std::uint64_t best = v;
      for (std::size_t s = 1; s < n && best != mask; ++s) {
        v = ((v << 1) & mask) | bits[(s + length - 1) % n];
        best = std::max(best, v);
      }
      out[k] = best;
    }
  });
  return out;
}

Estimate interval_dominance_prob(const ThresholdString& y, std::size_t n,
                                 double p, std::size_t N, std::uint64_t seed,
                                 unsigned workers) {
  check_length(n, y.length);
  if (y.length < 64 && (y.value >> y.length) != 0) {
    throw InvalidArgument("interval_dominance_prob: y does not fit in l bits");
  }
  const auto maxima = window_maxima(n, y.length, p, N, seed, workers);
  std::size_t hits = 0;
  for (auto m : maxima) hits += m >= y.value;
  const double P = static_cast<double>(hits) / static_cast<double>(N);
  return Estimate{P, std::sqrt(P * (1 - P) / static_cast<double>(N)), N};
}

ThresholdCalibration find_threshold_string(double q, std::size_t n,
                                           std::size_t length, std::size_t N,
                                           std::uint64_t seed,
                                           unsigned workers) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidArgument("find_threshold_string: q must lie in (0, 1)");
  }
  auto maxima = window_maxima(n, length, 0.5, N, seed, workers);
  std::sort(maxima.begin(), maxima.end());
  return calibrate(maxima, q, n, length);
}

// ---------------------------------------------------------- constructions

FlipTimeSample Construction::sample(std::size_t N, std::uint64_t seed,
                                    unsigned workers) const {
  return rescale(sample_flip_times(*this, N, seed, workers), spec_.a_n, 0.5);
}

ConstructionPtr build_plain(const FiniteMeasure& measure, std::size_t n,
                            double a_n) {
  ConstructionSpec spec;
  spec.mode = ConstructionMode::kPlain;
  spec.scaling = validate_scaling(a_n, n, false);
  spec.n = n;
  spec.a_n = a_n;
  spec.block = static_cast<std::size_t>(std::floor(a_n));
  if (spec.block < 1) throw InvalidArgument("build_plain: floor(a_n) must be >= 1");
  return std::make_shared<PlainConstruction>(measure, std::move(spec));
}

namespace {

ConstructionSpec transitive_spec(std::size_t n, double a_n) {
  ConstructionSpec spec;
  spec.mode = ConstructionMode::kTransitive;
  spec.scaling = validate_scaling(a_n, n, true);
  spec.n = n;
  spec.a_n = a_n;
  spec.length = transitive_window_length(n);
  check_length(n, spec.length);
  return spec;
}

}  // namespace

ConstructionPtr build_transitive(const FiniteMeasure& measure, std::size_t n,
                                 double a_n, const TransitiveOptions& options) {
  ConstructionSpec spec = transitive_spec(n, a_n);
  spec.calibration_N = options.calibration_N;
  spec.calibration_seed = options.seed;
  if (measure.size() > 1) {
    // One batch of window maxima serves every threshold.
    auto maxima = window_maxima(n, spec.length, 0.5, options.calibration_N,
                                options.seed, options.workers);
    std::sort(maxima.begin(), maxima.end());
    double cumulative = 0.0;
    for (std::size_t i = 0; i + 1 < measure.size(); ++i) {
      cumulative += measure.atoms()[i].q;
      auto c = calibrate(maxima, std::min(cumulative, 1.0 - 1e-15), n, spec.length);
      if (!spec.thresholds.empty()) {
        c.y.value = std::min(c.y.value, spec.thresholds.back().y.value);
      }
      spec.thresholds.push_back(std::move(c));
    }
  }
  ThresholdCalibration last;
  last.y.length = spec.length;
  last.target = 1.0;
  last.achieved = Estimate{1.0, 0.0, options.calibration_N};
  spec.thresholds.push_back(last);
  return std::make_shared<TransitiveConstruction>(measure, std::move(spec));
}

ConstructionPtr build_transitive(const FiniteMeasure& measure, std::size_t n,
                                 double a_n, std::vector<std::uint64_t> thresholds) {
  ConstructionSpec spec = transitive_spec(n, a_n);
  if (thresholds.size() + 1 != measure.size()) {
    throw InvalidArgument("build_transitive: need one threshold per atom except the last");
  }
  thresholds.push_back(0);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] >> spec.length) {
      throw InvalidArgument("build_transitive: threshold does not fit in l bits");
    }
    if (i > 0 && thresholds[i] > thresholds[i - 1]) {
      throw InvalidArgument("build_transitive: thresholds must be nonincreasing");
    }
    ThresholdCalibration c;
    c.y = ThresholdString{thresholds[i], spec.length};
    c.target = std::nan("");
    spec.thresholds.push_back(c);
  }
  return std::make_shared<TransitiveConstruction>(measure, std::move(spec));
}

}  // namespace flipscale
