#include "flipscale/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "flipscale/errors.hpp"
#include "flipscale/rng.hpp"

namespace flipscale {

unsigned resolve_workers(unsigned workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  return workers;
}

void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  workers = resolve_workers(workers);
  if (count == 0) return;
  const std::size_t chunk =
      std::clamp<std::size_t>(count / (8 * std::size_t{workers}), 1, 256);
  if (workers == 1 || count <= chunk) {
    body(0, count);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= count) return;
        body(begin, std::min(count, begin + chunk));
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(count);
    }
  };
  std::vector<std::thread> pool;
  const unsigned spawn = static_cast<unsigned>(
      std::min<std::size_t>(workers, (count + chunk - 1) / chunk));
  for (unsigned w = 1; w < spawn; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

FlipTimeSample sample_flip_times(const MonotoneFunction& f, std::size_t N,
                                 std::uint64_t base_seed, unsigned workers) {
  if (N == 0) throw InvalidArgument("sample_flip_times: N must be >= 1");
  FlipTimeSample out;
  out.n = f.size();
  out.base_seed = base_seed;
  out.values.resize(N);
  out.stream_keys.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    out.stream_keys[k] = rng::stream_key(base_seed, k);
  }
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> labels(f.size());
    for (std::size_t k = begin; k < end; ++k) {
      fill_uniform_labels(labels, out.stream_keys[k]);
      out.values[k] = flip_time(f, labels).value;
    }
  });
  return out;
}

FlipTimeSample sample_flip_times(const FamilySpec& spec, std::size_t N,
                                 std::uint64_t base_seed, unsigned workers) {
  auto f = make_family(spec);
  FlipTimeSample out = sample_flip_times(*f, N, base_seed, workers);
  out.family = spec;
  return out;
}

FlipTimeSample rescale(const FlipTimeSample& sample, double a, double b) {
  if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw InvalidArgument("rescale: a_n must be a positive finite number");
  }
  FlipTimeSample out = sample;
  for (auto& v : out.values) v = a * (v - b);
  out.a_n = a;
  out.b_n = b;
  return out;
}

FlipTimeSample unscale(const FlipTimeSample& sample) {
  if (!sample.a_n || !sample.b_n) return sample;
  FlipTimeSample out = sample;
  for (auto& v : out.values) v = v / *sample.a_n + *sample.b_n;
  out.a_n.reset();
  out.b_n.reset();
  return out;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw InvalidArgument("EmpiricalCdf: empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

double EmpiricalCdf::below(double x) const {
  const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

double ks_distance(const EmpiricalCdf& ecdf,
                   const std::function<double(double)>& cdf) {
  const auto xs = ecdf.sorted();
  const double N = static_cast<double>(xs.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < xs.size()) {
    std::size_t j = i;
    while (j < xs.size() && xs[j] == xs[i]) ++j;
    const double x = xs[i];
    const double left = cdf(std::nextafter(x, -INFINITY));
    const double at = cdf(x);
    worst = std::max(worst, std::abs(static_cast<double>(i) / N - left));
    worst = std::max(worst, std::abs(static_cast<double>(j) / N - at));
    i = j;
  }
  return worst;
}

double ks_distance(const EmpiricalCdf& ecdf, const AnalyticLimit& limit) {
  return ks_distance(ecdf, limit.cdf);
}

double ks_two_sample(const EmpiricalCdf& a, const EmpiricalCdf& b) {
  double worst = 0.0;
  for (const auto* s : {&a, &b}) {
    for (double x : s->sorted()) {
      worst = std::max(worst, std::abs(a(x) - b(x)));
      worst = std::max(worst, std::abs(a.below(x) - b.below(x)));
    }
  }
  return worst;
}

double dkw_bound(std::size_t N, double confidence) {
  if (N == 0) throw InvalidArgument("dkw_bound: N must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw InvalidArgument("dkw_bound: confidence must lie in (0, 1)");
  }
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) /
                   (2.0 * static_cast<double>(N)));
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 32) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanStats mean_and_stderr(std::span<const double> v) {
  MeanStats out;
  if (v.empty()) return out;
  const double N = static_cast<double>(v.size());
  out.mean = pairwise_sum(v) / N;
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
  out.std_error = std::sqrt(pairwise_sum(sq) / (N - 1) / N);
  return out;
}

namespace {

Estimate bernoulli_estimate(std::size_t hits, std::size_t N) {
  Estimate e;
  e.N = N;
  e.value = static_cast<double>(hits) / static_cast<double>(N);
  e.std_error = std::sqrt(e.value * (1 - e.value) / static_cast<double>(N));
  return e;
}

}  // namespace

std::vector<Estimate> estimate_probabilities(const MonotoneFunction& f,
                                             std::span<const double> ps,
                                             std::size_t N,
                                             std::uint64_t base_seed,
                                             unsigned workers) {
  const auto sample = sample_flip_times(f, N, base_seed, workers);
  std::vector<Estimate> out;
  for (double p : ps) {
    std::size_t hits = 0;
    for (double t : sample.values) hits += t <= p;
    out.push_back(bernoulli_estimate(hits, N));
  }
  return out;
}

InfluenceEstimate estimate_influence(const MonotoneFunction& f, double p,
                                     std::size_t N, std::uint64_t base_seed,
                                     unsigned workers) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("estimate_influence: p must lie in (0, 1)");
  }
  if (N < 2) throw InvalidArgument("estimate_influence: N must be >= 2");
  const std::size_t n = f.size();
  std::vector<std::uint32_t> classes = f.symmetry_classes();
  if (classes.size() != n) classes.assign(n, 0);
  const std::size_t k_classes =
      static_cast<std::size_t>(*std::max_element(classes.begin(), classes.end())) + 1;
  std::vector<std::size_t> class_size(k_classes, 0);
  for (auto c : classes) ++class_size[c];

  std::vector<double> totals(N);
  std::vector<std::uint8_t> outputs(N);
  std::vector<double> per_class(N * k_classes, 0.0);
  parallel_for(N, workers, [&](std::size_t begin, std::size_t end) {
    BitConfig w(n);
    std::vector<std::uint8_t> mask;
    for (std::size_t k = begin; k < end; ++k) {
      const std::uint64_t key = rng::stream_key(base_seed, k);
      for (std::size_t i = 0; i < n; ++i) w.set(i, rng::counter_uniform(key, i) <= p);
      const std::size_t count = f.count_pivotal(w, k_classes > 1 ? &mask : nullptr);
      totals[k] = static_cast<double>(count);
      outputs[k] = f.evaluate(w);
      if (k_classes > 1) {
        for (std::size_t i = 0; i < n; ++i) {
          if (mask[i]) per_class[k * k_classes + classes[i]] += 1.0;
        }
      } else {
        per_class[k] = totals[k];
      }
    }
  });

  InfluenceEstimate out;
  out.p = p;
  out.N = N;
  const auto t = mean_and_stderr(totals);
  out.total = Estimate{t.mean, t.std_error, N};
  std::size_t ones = 0;
  for (auto o : outputs) ones += o;
  out.probability = bernoulli_estimate(ones, N);
  const double P = out.probability.value;
  const double Nd = static_cast<double>(N);
  // Unbiased P(1 - P); delta-method standard error.
  out.variance.value = P * (1 - P) * Nd / (Nd - 1);
  out.variance.std_error = std::abs(1 - 2 * P) * out.probability.std_error;
  out.variance.N = N;
  out.class_size = class_size;
  std::vector<double> column(N);
  for (std::size_t c = 0; c < k_classes; ++c) {
    for (std::size_t k = 0; k < N; ++k) {
      column[k] = per_class[k * k_classes + c] / static_cast<double>(class_size[c]);
    }
    const auto s = mean_and_stderr(column);
    out.class_influence.push_back(s.mean);
    out.class_stderr.push_back(s.std_error);
  }
  return out;
}

InfluenceEstimate estimate_influence(const FamilySpec& spec, double p,
                                     std::size_t N, std::uint64_t base_seed,
                                     unsigned workers) {
  auto f = make_family(spec);
  return estimate_influence(*f, p, N, base_seed, workers);
}

}  // namespace flipscale
