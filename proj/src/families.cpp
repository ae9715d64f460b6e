#include "flipscale/families.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "flipscale/errors.hpp"
#include "flipscale/itermaj.hpp"
#include "flipscale/normal.hpp"
#include "flipscale/union_find.hpp"

namespace flipscale {

namespace {

constexpr std::size_t kMaxBits = std::size_t{1} << 31;

// (label, index) pairs order bits exactly as ordered insertion does.
using Event = std::pair<double, std::uint32_t>;

FlipTime to_flip(const Event& e) { return FlipTime{e.first, e.second}; }

std::vector<std::uint32_t> uniform_classes(std::size_t n) {
  return std::vector<std::uint32_t>(n, 0);
}

// The k-th smallest (1-based) event among all labels.
Event kth_event(std::span<const double> labels, std::size_t k) {
  std::vector<double> copy(labels.begin(), labels.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<long>(k - 1),
                   copy.end());
  const double v = copy[k - 1];
  std::size_t below = 0;
  for (double x : labels) below += x < v;
  std::size_t need = k - below;  // rank among the labels equal to v
  for (std::uint32_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == v && --need == 0) return {v, i};
  }
  return {v, 0};  // unreachable
}

class CounterState final : public IncrementalState {
 public:
  explicit CounterState(std::size_t threshold) : threshold_(threshold) {}
  bool insert(std::size_t) override { return ++count_ >= threshold_; }
  bool value() const override { return count_ >= threshold_; }

 private:
  std::size_t threshold_;
  std::size_t count_ = 0;
};

class ConstantState final : public IncrementalState {
 public:
  explicit ConstantState(bool v) : v_(v) {}
  bool insert(std::size_t) override { return v_; }
  bool value() const override { return v_; }

 private:
  bool v_;
};

// ---------------------------------------------------------------- simple

class Dictator final : public MonotoneFunction {
 public:
  explicit Dictator(std::size_t n) : n_(n) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig& w) const override { return w[0]; }
  std::string name() const override { return "dictator"; }

  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      bool insert(std::size_t i) override { return on_ = on_ || i == 0; }
      bool value() const override { return on_; }

     private:
      bool on_ = false;
    };
    return std::make_unique<S>();
  }
  std::optional<WitnessList> one_witnesses() const override {
    return WitnessList{{0}};
  }
  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    return FlipTime{labels[0], 0};
  }
  std::size_t count_pivotal(const BitConfig&,
                            std::vector<std::uint8_t>* mask) const override {
    if (mask) {
      mask->assign(n_, 0);
      (*mask)[0] = 1;
    }
    return 1;
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    std::vector<std::uint32_t> c(n_, 1);
    c[0] = 0;
    return c;
  }

 private:
  std::size_t n_;
};

class Or final : public MonotoneFunction {
 public:
  explicit Or(std::size_t n) : n_(n) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig& w) const override { return w.count() > 0; }
  std::string name() const override { return "or"; }
  std::unique_ptr<IncrementalState> start() const override {
    return std::make_unique<CounterState>(1);
  }
  std::optional<WitnessList> one_witnesses() const override {
    WitnessList w(n_);
    for (std::size_t i = 0; i < n_; ++i) w[i] = {i};
    return w;
  }
  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    Event best{labels[0], 0};
    for (std::uint32_t i = 1; i < n_; ++i) best = std::min(best, Event{labels[i], i});
    return to_flip(best);
  }
  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override {
    const std::size_t c = w.count();
    if (mask) mask->assign(n_, 0);
    if (c == 0) {
      if (mask) mask->assign(n_, 1);
      return n_;
    }
    if (c == 1) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (w[i] && mask) (*mask)[i] = 1;
      }
      return 1;
    }
    return 0;
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(n_);
  }

 private:
  std::size_t n_;
};

class And final : public MonotoneFunction {
 public:
  explicit And(std::size_t n) : n_(n) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig& w) const override { return w.count() == n_; }
  std::string name() const override { return "and"; }
  std::unique_ptr<IncrementalState> start() const override {
    return std::make_unique<CounterState>(n_);
  }
  std::optional<WitnessList> one_witnesses() const override {
    std::vector<std::size_t> all(n_);
    for (std::size_t i = 0; i < n_; ++i) all[i] = i;
    return WitnessList{all};
  }
  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    Event best{labels[0], 0};
    for (std::uint32_t i = 1; i < n_; ++i) best = std::max(best, Event{labels[i], i});
    return to_flip(best);
  }
  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override {
    const std::size_t c = w.count();
    if (mask) mask->assign(n_, 0);
    if (c == n_) {
      if (mask) mask->assign(n_, 1);
      return n_;
    }
    if (c + 1 == n_) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (!w[i] && mask) (*mask)[i] = 1;
      }
      return 1;
    }
    return 0;
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(n_);
  }

 private:
  std::size_t n_;
};

class Constant final : public MonotoneFunction {
 public:
  Constant(std::size_t n, bool v) : n_(n), v_(v) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig&) const override { return v_; }
  std::string name() const override {
    return v_ ? "constant-one" : "constant-zero";
  }
  std::unique_ptr<IncrementalState> start() const override {
    return std::make_unique<ConstantState>(v_);
  }
  std::size_t count_pivotal(const BitConfig&,
                            std::vector<std::uint8_t>* mask) const override {
    if (mask) mask->assign(n_, 0);
    return 0;
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(n_);
  }

 private:
  std::size_t n_;
  bool v_;
};

// ---------------------------------------------------------------- majority

class Majority final : public MonotoneFunction {
 public:
  Majority(std::size_t n, double p) : n_(n), p_(p) {
    const double target = std::ceil(p * static_cast<double>(n) - 1e-9);
    k_ = static_cast<std::size_t>(std::max(1.0, target));
  }
  std::size_t size() const override { return n_; }
  std::size_t threshold() const { return k_; }
  bool evaluate(const BitConfig& w) const override { return w.count() >= k_; }
  std::string name() const override {
    std::ostringstream s;
    s << "majority(n=" << n_ << ",p=" << p_ << ")";
    return s.str();
  }
  std::unique_ptr<IncrementalState> start() const override {
    return std::make_unique<CounterState>(k_);
  }
  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    return to_flip(kth_event(labels, k_));
  }
  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override {
    const std::size_t c = w.count();
    if (mask) mask->assign(n_, 0);
    // At the threshold every one is pivotal; one below it every zero is.
    bool want;
    if (c == k_) {
      want = true;
    } else if (c + 1 == k_) {
      want = false;
    } else {
      return 0;
    }
    if (mask) {
      for (std::size_t i = 0; i < n_; ++i) (*mask)[i] = w[i] == want;
    }
    return want ? c : n_ - c;
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(n_);
  }

 private:
  std::size_t n_;
  double p_;
  std::size_t k_;
};

// ---------------------------------------------------------------- tribes

class Tribes final : public MonotoneFunction {
 public:
  explicit Tribes(std::size_t n)
      : n_(n), len_(tribe_length(n)), tribes_(n / len_) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig& w) const override {
    for (std::size_t t = 0; t < tribes_; ++t) {
      bool all = true;
      for (std::size_t j = t * len_; j < (t + 1) * len_ && all; ++j) all = w[j];
      if (all) return true;
    }
    return false;
  }
  std::string name() const override {
    return "tribes(n=" + std::to_string(n_) + ")";
  }
  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      S(std::size_t len, std::size_t tribes) : len_(len), count_(tribes, 0) {}
      bool insert(std::size_t i) override {
        const std::size_t t = i / len_;
        if (t < count_.size() && ++count_[t] == len_) done_ = true;
        return done_;
      }
      bool value() const override { return done_; }

     private:
      std::size_t len_;
      std::vector<std::uint32_t> count_;
      bool done_ = false;
    };
    return std::make_unique<S>(len_, tribes_);
  }
  std::optional<WitnessList> one_witnesses() const override {
    WitnessList w(tribes_);
    for (std::size_t t = 0; t < tribes_; ++t) {
      for (std::size_t j = 0; j < len_; ++j) w[t].push_back(t * len_ + j);
    }
    return w;
  }
  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    Event best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t t = 0; t < tribes_; ++t) {
      const auto base = static_cast<std::uint32_t>(t * len_);
      Event worst{labels[base], base};
      for (std::uint32_t j = base + 1; j < base + len_; ++j) {
        worst = std::max(worst, Event{labels[j], j});
        if (worst > best) break;
      }
      best = std::min(best, worst);
    }
    return to_flip(best);
  }
  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override {
    if (mask) mask->assign(n_, 0);
    std::size_t full = 0, full_tribe = 0, count = 0;
    std::vector<std::size_t> ones(tribes_, 0);
    for (std::size_t t = 0; t < tribes_; ++t) {
      for (std::size_t j = t * len_; j < (t + 1) * len_; ++j) ones[t] += w[j];
      if (ones[t] == len_) {
        ++full;
        full_tribe = t;
      }
    }
    if (full >= 2) return 0;
    if (full == 1) {
      if (mask) {
        for (std::size_t j = 0; j < len_; ++j) (*mask)[full_tribe * len_ + j] = 1;
      }
      return len_;
    }
    for (std::size_t t = 0; t < tribes_; ++t) {
      if (ones[t] + 1 != len_) continue;
      ++count;
      if (mask) {
        for (std::size_t j = t * len_; j < (t + 1) * len_; ++j) {
          if (!w[j]) (*mask)[j] = 1;
        }
      }
    }
    return count;
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    std::vector<std::uint32_t> c(n_, 1);
    std::fill(c.begin(), c.begin() + static_cast<long>(tribes_ * len_), 0);
    return c;
  }

 private:
  std::size_t n_, len_, tribes_;
};

// ---------------------------------------------------------- circular tribes

class CircularTribes final : public MonotoneFunction {
 public:
  explicit CircularTribes(std::size_t n) : n_(n), len_(circular_run_length(n)) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig& w) const override {
    std::size_t zero = n_;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!w[i]) {
        zero = i;
        break;
      }
    }
    if (zero == n_) return n_ >= len_;
    std::size_t run = 0;
    for (std::size_t t = 1; t <= n_; ++t) {
      if (w[(zero + t) % n_]) {
        if (++run >= len_) return true;
      } else {
        run = 0;
      }
    }
    return false;
  }
  std::string name() const override {
    return "circular-tribes(n=" + std::to_string(n_) + ")";
  }
  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      S(std::size_t n, std::size_t len) : len_(len), on_(n, 0), uf_(n) {}
      bool insert(std::size_t i) override {
        if (on_[i]) return done_;
        on_[i] = 1;
        const std::size_t n = on_.size();
        const auto a = static_cast<UnionFind::Index>(i);
        const auto left = static_cast<UnionFind::Index>((i + n - 1) % n);
        const auto right = static_cast<UnionFind::Index>((i + 1) % n);
        if (on_[left]) uf_.unite(a, left);
        if (on_[right]) uf_.unite(a, right);
        if (uf_.component_size(a) >= len_) done_ = true;
        return done_;
      }
      bool value() const override { return done_; }

     private:
      std::size_t len_;
      std::vector<std::uint8_t> on_;
      UnionFind uf_;
      bool done_ = false;
    };
    return std::make_unique<S>(n_, len_);
  }
  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override;
  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(n_);
  }

 private:
  std::size_t n_, len_;
};

std::size_t CircularTribes::count_pivotal(
    const BitConfig& w, std::vector<std::uint8_t>* mask) const {
  const std::size_t n = n_, L = len_;
  if (mask) mask->assign(n, 0);
  auto mark = [&](std::size_t i) {
    if (mask) (*mask)[i] = 1;
  };
  std::size_t zero = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!w[i]) {
      zero = i;
      break;
    }
  }
  if (zero == n) {
    // All ones: removing a bit leaves a run of n - 1.
    if (n - 1 >= L) return 0;
    for (std::size_t i = 0; i < n; ++i) mark(i);
    return n;
  }
  // Offsets t = 1..n from the first zero; offset n is that zero again, so
  // no run of ones wraps.
  auto pos = [&](std::size_t t) { return (zero + t) % n; };
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // (start, length)
  std::size_t t = 1;
  while (t < n) {
    if (!w[pos(t)]) {
      ++t;
      continue;
    }
    std::size_t s = t;
    while (t < n && w[pos(t)]) ++t;
    runs.emplace_back(s, t - s);
  }
  std::size_t long_runs = 0;
  std::pair<std::size_t, std::size_t> the_run{0, 0};
  for (const auto& r : runs) {
    if (r.second >= L) {
      ++long_runs;
      the_run = r;
    }
  }
  if (long_runs >= 2) return 0;
  if (long_runs == 1) {
    const std::size_t r = the_run.second;
    std::size_t count = 0;
    for (std::size_t j = 0; j < r; ++j) {
      if (j < L && r - 1 - j < L) {
        ++count;
        mark(pos(the_run.first + j));
      }
    }
    return count;
  }
  // Output 0: a zero is pivotal when it would join its neighbouring runs
  // into one of length >= L. Every run is shorter than L here.
  if (w.count() == n - 1) {
    mark(zero);
    return n >= L ? 1 : 0;
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i]) continue;
    std::size_t joined = 1;
    for (std::size_t u = 1; u < n && w[(i + u) % n]; ++u) ++joined;
    for (std::size_t u = 1; u < n && w[(i + n - u) % n]; ++u) ++joined;
    if (joined >= L) {
      ++count;
      mark(i);
    }
  }
  return count;
}

// --------------------------------------------------------- iterated majority

class IteratedMajority final : public MonotoneFunction {
 public:
  IteratedMajority(int m, int height) : m_(m), height_(height) {
    n_ = 1;
    for (int k = 0; k < height; ++k) n_ *= static_cast<std::size_t>(m);
  }
  std::size_t size() const override { return n_; }
  std::string name() const override {
    return "itermaj(m=" + std::to_string(m_) + ",h=" + std::to_string(height_) +
           ")";
  }

  bool evaluate(const BitConfig& w) const override {
    std::vector<std::uint8_t> level(w.raw().begin(), w.raw().end());
    reduce_to_root(level);
    return level[0];
  }

  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      S(std::size_t n, int m, int height) : m_(static_cast<std::size_t>(m)) {
        need_ = (m_ + 1) / 2;
        std::size_t width = n;
        for (int k = 0; k < height; ++k) {
          width /= m_;
          counts_.emplace_back(width, 0);
        }
      }
      bool insert(std::size_t i) override {
        if (done_) return true;
        std::size_t node = i;
        for (auto& level : counts_) {
          node /= m_;
          if (++level[node] != need_) return false;
        }
        done_ = true;
        return true;
      }
      bool value() const override { return done_; }

     private:
      std::size_t m_, need_;
      std::vector<std::vector<std::uint32_t>> counts_;  // leaf parents first
      bool done_ = false;
    };
    return std::make_unique<S>(n_, m_, height_);
  }

  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    const std::size_t m = static_cast<std::size_t>(m_);
    const std::size_t rank = (m - 1) / 2;  // 0-based median
    std::size_t width = n_ / m;
    std::vector<Event> level(width);
    Event group[64];
    if (m == 3) {
      for (std::size_t g = 0; g < width; ++g) {
        const auto b = static_cast<std::uint32_t>(3 * g);
        level[g] = median3(Event{labels[b], b}, Event{labels[b + 1], b + 1},
                           Event{labels[b + 2], b + 2});
      }
    } else {
      std::vector<Event> big(m);
      for (std::size_t g = 0; g < width; ++g) {
        for (std::size_t j = 0; j < m; ++j) {
          const auto i = static_cast<std::uint32_t>(g * m + j);
          big[j] = Event{labels[i], i};
        }
        std::nth_element(big.begin(), big.begin() + static_cast<long>(rank),
                         big.end());
        level[g] = big[rank];
      }
    }
    while (width > 1) {
      const std::size_t next = width / m;
      for (std::size_t g = 0; g < next; ++g) {
        if (m == 3) {
          level[g] = median3(level[3 * g], level[3 * g + 1], level[3 * g + 2]);
        } else if (m <= 64) {
          std::copy_n(level.begin() + static_cast<long>(g * m), m, group);
          std::nth_element(group, group + rank, group + m);
          level[g] = group[rank];
        } else {
          std::vector<Event> tmp(level.begin() + static_cast<long>(g * m),
                                 level.begin() + static_cast<long>((g + 1) * m));
          std::nth_element(tmp.begin(), tmp.begin() + static_cast<long>(rank),
                           tmp.end());
          level[g] = tmp[rank];
        }
      }
      width = next;
    }
    return to_flip(level[0]);
  }

  std::size_t count_pivotal(const BitConfig& w,
                            std::vector<std::uint8_t>* mask) const override {
    const std::size_t m = static_cast<std::size_t>(m_);
    const std::size_t half = (m - 1) / 2;
    // levels[0] = leaves, levels[height] = root.
    std::vector<std::vector<std::uint8_t>> levels;
    levels.emplace_back(w.raw().begin(), w.raw().end());
    while (levels.back().size() > 1) {
      const auto& cur = levels.back();
      std::vector<std::uint8_t> up(cur.size() / m);
      for (std::size_t g = 0; g < up.size(); ++g) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < m; ++j) c += cur[g * m + j];
        up[g] = c > half;
      }
      levels.push_back(std::move(up));
    }
    // A child is pivotal for its parent when its siblings split evenly.
    std::vector<std::uint8_t> piv{1};
    for (std::size_t d = levels.size() - 1; d-- > 0;) {
      const auto& cur = levels[d];
      std::vector<std::uint8_t> next(cur.size(), 0);
      for (std::size_t g = 0; g < piv.size(); ++g) {
        if (!piv[g]) continue;
        std::size_t c = 0;
        for (std::size_t j = 0; j < m; ++j) c += cur[g * m + j];
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t others = c - cur[g * m + j];
          next[g * m + j] = others == half;
        }
      }
      piv = std::move(next);
    }
    if (mask) *mask = piv;
    return static_cast<std::size_t>(std::count(piv.begin(), piv.end(), 1));
  }

  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(n_);
  }

 private:
  static Event median3(const Event& a, const Event& b, const Event& c) {
    if (a < b) {
      if (b < c) return b;
      return a < c ? c : a;
    }
    if (a < c) return a;
    return b < c ? c : b;
  }

  void reduce_to_root(std::vector<std::uint8_t>& level) const {
    const std::size_t m = static_cast<std::size_t>(m_);
    std::size_t width = level.size();
    while (width > 1) {
      const std::size_t next = width / m;
      for (std::size_t g = 0; g < next; ++g) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < m; ++j) c += level[g * m + j];
        level[g] = 2 * c > m;
      }
      width = next;
    }
  }

  int m_, height_;
  std::size_t n_;
};

// ---------------------------------------------------------- graph families

class Graph {
 public:
  explicit Graph(std::size_t v) : v_(v), words_((v + 63) / 64), adj_(v * words_, 0) {}
  std::size_t vertices() const { return v_; }
  std::size_t words() const { return words_; }
  void add(std::size_t a, std::size_t b) {
    row(a)[b / 64] |= std::uint64_t{1} << (b % 64);
    row(b)[a / 64] |= std::uint64_t{1} << (a % 64);
  }
  std::uint64_t* row(std::size_t a) { return adj_.data() + a * words_; }
  const std::uint64_t* row(std::size_t a) const {
    return adj_.data() + a * words_;
  }
  bool share_neighbour(std::size_t a, std::size_t b) const {
    const auto* ra = row(a);
    const auto* rb = row(b);
    for (std::size_t k = 0; k < words_; ++k) {
      if (ra[k] & rb[k]) return true;
    }
    return false;
  }

 private:
  std::size_t v_, words_;
  std::vector<std::uint64_t> adj_;
};

struct EdgeTable {
  std::vector<std::uint32_t> first, second;
  explicit EdgeTable(std::size_t v) {
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = a + 1; b < v; ++b) {
        first.push_back(static_cast<std::uint32_t>(a));
        second.push_back(static_cast<std::uint32_t>(b));
      }
    }
  }
};

// Is there a clique of `need` vertices inside `cand` (a vertex bitset)?
bool has_clique(const Graph& g, std::vector<std::uint64_t>& cand,
                std::size_t need) {
  if (need == 0) return true;
  std::size_t pop = 0;
  for (auto x : cand) pop += static_cast<std::size_t>(std::popcount(x));
  if (pop < need) return false;
  const std::size_t W = g.words();
  std::vector<std::uint64_t> sub(W);
  for (std::size_t k = 0; k < W; ++k) {
    while (cand[k]) {
      const std::size_t bit = static_cast<std::size_t>(std::countr_zero(cand[k]));
      const std::size_t v = k * 64 + bit;
      cand[k] &= cand[k] - 1;  // later searches never revisit v
      if (need == 1) return true;
      const auto* r = g.row(v);
      for (std::size_t j = 0; j < W; ++j) sub[j] = cand[j] & r[j];
      if (has_clique(g, sub, need - 1)) return true;
    }
  }
  return false;
}

class GraphFamily : public MonotoneFunction {
 public:
  explicit GraphFamily(std::size_t v) : v_(v), edges_(v) {}
  std::size_t size() const override { return edges_.first.size(); }
  std::vector<std::uint32_t> symmetry_classes() const override {
    return uniform_classes(size());
  }

 protected:
  Graph build(const BitConfig& w) const {
    Graph g(v_);
    for (std::size_t e = 0; e < size(); ++e) {
      if (w[e]) g.add(edges_.first[e], edges_.second[e]);
    }
    return g;
  }
  std::size_t v_;
  EdgeTable edges_;
};

class Triangle final : public GraphFamily {
 public:
  using GraphFamily::GraphFamily;
  std::string name() const override {
    return "triangle(v=" + std::to_string(v_) + ")";
  }
  bool evaluate(const BitConfig& w) const override {
    Graph g = build(w);
    for (std::size_t e = 0; e < size(); ++e) {
      if (w[e] && g.share_neighbour(edges_.first[e], edges_.second[e])) return true;
    }
    return false;
  }
  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      explicit S(const Triangle& f) : f_(f), g_(f.v_) {}
      bool insert(std::size_t e) override {
        if (done_) return true;
        const auto a = f_.edges_.first[e], b = f_.edges_.second[e];
        if (g_.share_neighbour(a, b)) done_ = true;
        g_.add(a, b);
        return done_;
      }
      bool value() const override { return done_; }

     private:
      const Triangle& f_;
      Graph g_;
      bool done_ = false;
    };
    return std::make_unique<S>(*this);
  }
};

class Connectivity final : public GraphFamily {
 public:
  using GraphFamily::GraphFamily;
  std::string name() const override {
    return "connectivity(v=" + std::to_string(v_) + ")";
  }
  bool evaluate(const BitConfig& w) const override {
    UnionFind uf(v_);
    for (std::size_t e = 0; e < size(); ++e) {
      if (w[e]) uf.unite(edges_.first[e], edges_.second[e]);
    }
    return uf.components() == 1;
  }
  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      explicit S(const Connectivity& f) : f_(f), uf_(f.v_) {}
      bool insert(std::size_t e) override {
        uf_.unite(f_.edges_.first[e], f_.edges_.second[e]);
        return value();
      }
      bool value() const override { return uf_.components() == 1; }

     private:
      const Connectivity& f_;
      UnionFind uf_;
    };
    return std::make_unique<S>(*this);
  }
};

class Clique final : public GraphFamily {
 public:
  Clique(std::size_t v, std::size_t order) : GraphFamily(v), order_(order) {}
  std::string name() const override {
    return "clique(v=" + std::to_string(v_) + ",l=" + std::to_string(order_) + ")";
  }
  bool evaluate(const BitConfig& w) const override {
    if (order_ <= 1) return true;
    if (order_ > v_) return false;
    Graph g = build(w);
    std::vector<std::uint64_t> all(g.words(), 0);
    for (std::size_t a = 0; a < v_; ++a) all[a / 64] |= std::uint64_t{1} << (a % 64);
    return has_clique(g, all, order_);
  }
  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      explicit S(const Clique& f)
          : f_(f), g_(f.v_), cand_(g_.words()), done_(f.order_ <= 1) {}
      bool insert(std::size_t e) override {
        if (done_ || f_.order_ > f_.v_) return done_;
        const auto a = f_.edges_.first[e], b = f_.edges_.second[e];
        g_.add(a, b);
        // Any new clique uses the new edge: look for order - 2 common
        // neighbours forming a clique.
        const auto* ra = g_.row(a);
        const auto* rb = g_.row(b);
        for (std::size_t k = 0; k < cand_.size(); ++k) cand_[k] = ra[k] & rb[k];
        done_ = has_clique(g_, cand_, f_.order_ - 2);
        return done_;
      }
      bool value() const override { return done_; }

     private:
      const Clique& f_;
      Graph g_;
      std::vector<std::uint64_t> cand_;
      bool done_;
    };
    return std::make_unique<S>(*this);
  }

 private:
  std::size_t order_;
};

// ------------------------------------------------- and-majority-dictator

class AndMajorityDictator final : public MonotoneFunction {
 public:
  explicit AndMajorityDictator(std::size_t n) : n_(n), maj_(n, 0.5) {}
  std::size_t size() const override { return n_; }
  bool evaluate(const BitConfig& w) const override {
    return w[0] && maj_.evaluate(w);
  }
  std::string name() const override {
    return "and-majority-dictator(n=" + std::to_string(n_) + ")";
  }
  std::unique_ptr<IncrementalState> start() const override {
    class S final : public IncrementalState {
     public:
      explicit S(std::size_t k) : k_(k) {}
      bool insert(std::size_t i) override {
        ++count_;
        first_ = first_ || i == 0;
        return value();
      }
      bool value() const override { return first_ && count_ >= k_; }

     private:
      std::size_t k_, count_ = 0;
      bool first_ = false;
    };
    return std::make_unique<S>(maj_.threshold());
  }
  std::optional<FlipTime> direct_flip_time(
      std::span<const double> labels) const override {
    return to_flip(std::max(Event{labels[0], 0},
                            kth_event(labels, maj_.threshold())));
  }
  std::vector<std::uint32_t> symmetry_classes() const override {
    std::vector<std::uint32_t> c(n_, 1);
    c[0] = 0;
    return c;
  }

 private:
  std::size_t n_;
  Majority maj_;
};

double log_choose(double n, double k) {
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

}  // namespace

// -------------------------------------------------------------- public API

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kMajority: return "majority";
    case Family::kTribes: return "tribes";
    case Family::kCircularTribes: return "circular-tribes";
    case Family::kIteratedMajority: return "iterated-majority";
    case Family::kTriangle: return "triangle";
    case Family::kConnectivity: return "connectivity";
    case Family::kClique: return "clique";
    case Family::kDictator: return "dictator";
    case Family::kOr: return "or";
    case Family::kAnd: return "and";
    case Family::kAndMajorityDictator: return "and-majority-dictator";
    case Family::kConstant: return "constant";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  static constexpr Family kAll[] = {
      Family::kMajority,     Family::kTribes,      Family::kCircularTribes,
      Family::kIteratedMajority, Family::kTriangle, Family::kConnectivity,
      Family::kClique,       Family::kDictator,    Family::kOr,
      Family::kAnd,          Family::kAndMajorityDictator, Family::kConstant};
  for (Family f : kAll) {
    if (to_string(f) == name) return f;
  }
  if (name == "itermaj") return Family::kIteratedMajority;
  throw InvalidArgument("unknown family '" + std::string(name) + "'");
}

std::size_t tribe_length(std::size_t n) {
  if (n < 2) throw InvalidArgument("tribes needs n >= 2");
  const double lg = std::log2(static_cast<double>(n));
  const double len = std::floor(lg - std::log2(lg) + 1e-12);
  if (len < 1) {
    throw InvalidArgument("tribes: tribe length floor(log2 n - log2 log2 n) is " +
                          std::string("below 1 for n = ") + std::to_string(n));
  }
  return static_cast<std::size_t>(len);
}

std::size_t circular_run_length(std::size_t n) {
  if (n < 2) throw InvalidArgument("circular tribes needs n >= 2");
  return static_cast<std::size_t>(std::bit_width(n) - 1);
}

std::size_t clique_size(std::size_t vertices, double p) {
  if (vertices < 3) throw InvalidArgument("clique_size: needs v >= 3");
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("clique_size: p must lie in (0, 1)");
  const double v = static_cast<double>(vertices);
  std::size_t best = 1;
  for (std::size_t l = 1; l <= vertices; ++l) {
    const double ld = static_cast<double>(l);
    const double log_mean = log_choose(v, ld) + ld * (ld - 1) / 2 * std::log(p);
    if (log_mean >= -1e-12) best = l;
  }
  return best;
}

std::size_t edge_index(std::size_t vertices, std::size_t u, std::size_t w) {
  if (u > w) std::swap(u, w);
  if (u == w || w >= vertices) throw InvalidArgument("edge_index: bad vertex pair");
  return u * (2 * vertices - u - 1) / 2 + (w - u - 1);
}

std::size_t FamilySpec::bit_count() const {
  switch (family) {
    case Family::kIteratedMajority: {
      std::size_t b = 1;
      for (int k = 0; k < height; ++k) {
        b *= static_cast<std::size_t>(m);
        if (b > kMaxBits) return b;
      }
      return b;
    }
    case Family::kTriangle:
    case Family::kConnectivity:
    case Family::kClique:
      return vertices * (vertices - (vertices > 0 ? 1 : 0)) / 2;
    default:
      return n;
  }
}

std::size_t FamilySpec::scale_index() const {
  switch (family) {
    case Family::kIteratedMajority: return static_cast<std::size_t>(height);
    case Family::kTriangle:
    case Family::kConnectivity:
    case Family::kClique: return vertices;
    default: return n;
  }
}

void FamilySpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw InvalidArgument(std::string(to_string(family)) + ": " + why);
  };
  switch (family) {
    case Family::kIteratedMajority:
      if (m < 3 || m % 2 == 0) fail("m must be odd and >= 3");
      if (height < 1) fail("height must be >= 1");
      if (bit_count() > kMaxBits) fail("m^height exceeds 2^31 bits");
      return;
    case Family::kTriangle:
    case Family::kClique:
      if (vertices < 3) fail("needs at least 3 vertices");
      [[fallthrough]];
    case Family::kConnectivity:
      if (vertices < 2) fail("needs at least 2 vertices");
      if (bit_count() > kMaxBits) fail("too many edges");
      if (family == Family::kClique) {
        if (!clique_size_override && !(clique_p > 0.0 && clique_p < 1.0)) {
          fail("clique p must lie in (0, 1)");
        }
        if (clique_pn && !(*clique_pn > 0.0 && *clique_pn < 1.0)) {
          fail("clique p_n must lie in (0, 1)");
        }
        if (clique_lambda && !(*clique_lambda > 0.0)) fail("lambda must be > 0");
      }
      return;
    default:
      break;
  }
  if (n < 1) fail("n must be >= 1");
  if (n > kMaxBits) fail("n exceeds 2^31");
  if (family == Family::kMajority && !(p_bias > 0.0 && p_bias < 1.0)) {
    fail("p_bias must lie in (0, 1)");
  }
  if (family == Family::kTribes) tribe_length(n);
  if (family == Family::kCircularTribes && n < 2) fail("needs n >= 2");
}

std::string FamilySpec::describe() const {
  std::ostringstream s;
  s << to_string(family) << "(";
  switch (family) {
    case Family::kIteratedMajority:
      s << "m=" << m << ",height=" << height;
      break;
    case Family::kTriangle:
    case Family::kConnectivity:
      s << "v=" << vertices;
      break;
    case Family::kClique:
      s << "v=" << vertices << ",l="
        << (clique_size_override ? *clique_size_override
                                 : clique_size(vertices, clique_p));
      break;
    case Family::kMajority:
      s << "n=" << n << ",p=" << p_bias;
      break;
    case Family::kConstant:
      s << "n=" << n << ",value=" << (constant_value ? 1 : 0);
      break;
    default:
      s << "n=" << n;
  }
  s << ")";
  return s.str();
}

FunctionPtr make_family(const FamilySpec& spec) {
  spec.validate();
  switch (spec.family) {
    case Family::kMajority: return std::make_shared<Majority>(spec.n, spec.p_bias);
    case Family::kTribes: return std::make_shared<Tribes>(spec.n);
    case Family::kCircularTribes: return std::make_shared<CircularTribes>(spec.n);
    case Family::kIteratedMajority:
      return std::make_shared<IteratedMajority>(spec.m, spec.height);
    case Family::kTriangle: return std::make_shared<Triangle>(spec.vertices);
    case Family::kConnectivity: return std::make_shared<Connectivity>(spec.vertices);
    case Family::kClique: {
      const std::size_t order = spec.clique_size_override
                                    ? *spec.clique_size_override
                                    : clique_size(spec.vertices, spec.clique_p);
      return std::make_shared<Clique>(spec.vertices, order);
    }
    case Family::kDictator: return std::make_shared<Dictator>(spec.n);
    case Family::kOr: return std::make_shared<Or>(spec.n);
    case Family::kAnd: return std::make_shared<And>(spec.n);
    case Family::kAndMajorityDictator:
      return std::make_shared<AndMajorityDictator>(spec.n);
    case Family::kConstant:
      return std::make_shared<Constant>(spec.n, spec.constant_value);
  }
  throw InvalidArgument("make_family: unknown family");
}

AnalyticLimit limit_law(const FamilySpec& spec) {
  AnalyticLimit out;
  const double p = spec.p_bias;
  switch (spec.family) {
    case Family::kMajority:
      out.name = "standard normal";
      out.cdf = [](double x) { return normal_cdf(x); };
      out.density = [](double x) { return normal_pdf(x); };
      out.normalization = [p](std::size_t n) {
        return Normalization{std::sqrt(static_cast<double>(n) / (p * (1 - p))), p};
      };
      return out;
    case Family::kTribes:
      out.name = "reverse Gumbel";
      out.cdf = [](double x) { return -std::expm1(-std::exp(x)); };
      out.density = [](double x) { return std::exp(x - std::exp(x)); };
      out.normalization = [](std::size_t n) {
        const double lg = std::log2(static_cast<double>(n));
        const double alpha = (lg - std::log2(lg)) / static_cast<double>(tribe_length(n));
        return Normalization{2 * lg, std::pow(0.5, alpha)};
      };
      return out;
    case Family::kIteratedMajority: {
      itermaj::Params params;
      params.m = spec.m;
      auto law = std::make_shared<itermaj::LimitFunction>(params);
      const double g = itermaj::gamma(spec.m);
      out.name = "iterated majority limit F_" + std::to_string(spec.m);
      out.cdf = [law](double x) { return law->cdf(x); };
      out.density = [law](double x) { return law->derivative(x); };
      out.normalization = [g](std::size_t height) {
        return Normalization{std::pow(g, static_cast<double>(height)), 0.5};
      };
      return out;
    }
    case Family::kTriangle:
      out.name = "1 - exp(-x^3/6)";
      out.cdf = [](double x) { return x <= 0 ? 0.0 : -std::expm1(-x * x * x / 6); };
      out.density = [](double x) {
        return x <= 0 ? 0.0 : x * x / 2 * std::exp(-x * x * x / 6);
      };
      out.normalization = [](std::size_t v) {
        return Normalization{static_cast<double>(v), 0.0};
      };
      return out;
    case Family::kConnectivity:
      out.name = "Gumbel";
      out.cdf = [](double x) { return std::exp(-std::exp(-x)); };
      out.density = [](double x) { return std::exp(-x - std::exp(-x)); };
      out.normalization = [](std::size_t v) {
        const double vd = static_cast<double>(v);
        return Normalization{vd, std::log(vd) / vd};
      };
      return out;
    case Family::kClique: {
      if (!spec.clique_pn || !spec.clique_lambda) {
        throw Unsupported(
            "clique: the limit law needs an admissible (p_n, lambda) pair");
      }
      const double pn = *spec.clique_pn, lambda = *spec.clique_lambda;
      const auto over = spec.clique_size_override;
      const double cp = spec.clique_p;
      out.name = "1 - exp(-lambda e^x)";
      out.cdf = [lambda](double x) { return -std::expm1(-lambda * std::exp(x)); };
      out.density = [lambda](double x) {
        return lambda * std::exp(x - lambda * std::exp(x));
      };
      out.normalization = [pn, over, cp](std::size_t v) {
        const double l = static_cast<double>(over ? *over : clique_size(v, cp));
        return Normalization{l * l / (2 * pn), pn};
      };
      return out;
    }
    case Family::kDictator:
      out.name = "uniform";
      out.cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
      out.density = [](double x) { return x >= 0 && x <= 1 ? 1.0 : 0.0; };
      out.normalization = [](std::size_t) { return Normalization{1.0, 0.0}; };
      return out;
    case Family::kOr:
      out.name = "unit exponential";
      out.cdf = [](double x) { return x <= 0 ? 0.0 : -std::expm1(-x); };
      out.density = [](double x) { return x < 0 ? 0.0 : std::exp(-x); };
      out.normalization = [](std::size_t n) {
        return Normalization{static_cast<double>(n), 0.0};
      };
      return out;
    case Family::kAnd:
      out.name = "reflected unit exponential";
      out.cdf = [](double x) { return x >= 0 ? 1.0 : std::exp(x); };
      out.density = [](double x) { return x > 0 ? 0.0 : std::exp(x); };
      out.normalization = [](std::size_t n) {
        return Normalization{static_cast<double>(n), 1.0};
      };
      return out;
    case Family::kAndMajorityDictator:
      out.name = "max(U, 1/2)";
      out.cdf = [](double x) { return x < 0.5 ? 0.0 : std::min(x, 1.0); };
      out.normalization = [](std::size_t) { return Normalization{1.0, 0.0}; };
      return out;
    case Family::kCircularTribes:
      throw Unsupported("circular-tribes: no quantitative limit law is provided");
    case Family::kConstant:
      throw Unsupported("constant: flip time is degenerate");
  }
  throw Unsupported("limit_law: unknown family");
}

}  // namespace flipscale
