#include "cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <sstream>

#include "cli/io.hpp"
#include "flipscale/constructor.hpp"
#include "flipscale/errors.hpp"
#include "flipscale/families.hpp"
#include "flipscale/montecarlo.hpp"
#include "flipscale/percolation.hpp"

namespace flipscale::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ------------------------------------------------------------ options

struct Common {
  std::string out_dir = ".";
  std::string prefix;
  std::string format = "csv";
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

struct FamilyOptions {
  std::string family = "majority";
  std::size_t n = 0;
  double p_bias = 0.5;
  int m = 3;
  int height = 1;
  std::size_t vertices = 0;
  double clique_p = 0.5;
  std::size_t clique_size = 0;
  double clique_pn = 0.0;
  double clique_lambda = 0.0;
  int constant = 0;

  FamilySpec spec() const {
    FamilySpec s;
    s.family = parse_family(family);
    s.n = n;
    s.p_bias = p_bias;
    s.m = m;
    s.height = height;
    s.vertices = vertices;
    s.clique_p = clique_p;
    if (clique_size > 0) s.clique_size_override = clique_size;
    if (clique_pn > 0) s.clique_pn = clique_pn;
    if (clique_lambda > 0) s.clique_lambda = clique_lambda;
    s.constant_value = constant != 0;
    return s;
  }
};

void add_family_options(CLI::App* sub, FamilyOptions& f) {
  sub->add_option("--family", f.family,
                  "majority | tribes | circular-tribes | iterated-majority (itermaj) | "
                  "triangle | connectivity | clique | dictator | or | and | "
                  "and-majority-dictator | constant");
  sub->add_option("--n", f.n, "bit count (non-graph families)");
  sub->add_option("--p-bias", f.p_bias, "majority threshold fraction");
  sub->add_option("--m", f.m, "iterated majority arity (odd)");
  sub->add_option("--height", f.height, "iterated majority depth");
  sub->add_option("--vertices", f.vertices, "vertex count for graph properties");
  sub->add_option("--clique-p", f.clique_p, "edge density defining the clique order");
  sub->add_option("--clique-size", f.clique_size, "explicit clique order (0 = derived)");
  sub->add_option("--clique-pn", f.clique_pn, "p_n of the clique limit law (0 = unset)");
  sub->add_option("--clique-lambda", f.clique_lambda, "lambda of the clique limit law (0 = unset)");
  sub->add_option("--constant", f.constant, "output of the constant family (0 or 1)");
}

// "a:b:step", "v1,v2,..." or a single value.
std::vector<double> parse_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw InvalidArgument("bad number '" + s + "' in grid '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto c1 = text.find(':'), c2 = text.rfind(':');
    const double a = number(text.substr(0, c1));
    const double b = number(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = number(text.substr(c2 + 1));
    if (!(step > 0) || !(b >= a)) throw InvalidArgument("grid '" + text + "' needs b >= a and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    if (count > 10'000'000) throw InvalidArgument("grid '" + text + "' is too long");
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(std::round((a + static_cast<double>(i) * step) * 1e12) / 1e12);
    }
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(number(item));
  if (out.empty()) throw InvalidArgument("empty grid");
  return out;
}

// -------------------------------------------------------------- results

struct Output {
  std::string suffix;  // appended to the prefix, extension included
  std::string bytes;
};

struct Result {
  json summary = json::object();
  std::vector<Output> files;
};

Output table_output(const Table& t, const std::string& format, const std::string& stem = "") {
  if (format == "json") return {stem + ".json", to_json(t).dump(2) + "\n"};
  return {stem + ".csv", to_csv(t)};
}

json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

// ------------------------------------------------------------- commands

Result cmd_limit(const Common&, const FamilyOptions& fam, const std::string& grid_text,
                 const std::string& format) {
  const FamilySpec spec = fam.spec();
  const auto law = limit_law(spec);
  std::string grid = grid_text;
  if (grid.empty()) grid = spec.family == Family::kDictator ? "0:1:0.1" : "-3:3:0.1";
  Table t{{"x", "F", "density", "family"}, {}};
  for (double x : parse_grid(grid)) {
    Cell d;
    if (law.density) d = law.density(x);
    t.add({x, law.cdf(x), d, std::string(to_string(spec.family))});
  }
  Result r;
  r.summary["law"] = law.name;
  r.summary["family"] = std::string(to_string(spec.family));
  r.summary["rows"] = t.rows.size();
  if (spec.scale_index() > 0) {
    const auto nb = law.normalization_for(spec);
    r.summary["a_n"] = nb.a;
    r.summary["b_n"] = nb.b;
  }
  r.files.push_back(table_output(t, format));
  return r;
}

struct SampleCheck {
  std::string kind;  // "ks" or "point"
  double tolerance = 0;
  double x = 0;
};

std::optional<SampleCheck> sample_check(Family f, std::size_t N) {
  switch (f) {
    case Family::kMajority: return SampleCheck{"ks", 0.02};
    case Family::kTribes: return SampleCheck{"ks", 0.03};
    case Family::kIteratedMajority: return SampleCheck{"ks", 0.03};
    case Family::kTriangle: return SampleCheck{"point", 0.02, 1.0};
    case Family::kConnectivity: return SampleCheck{"point", 0.03, 0.0};
    case Family::kDictator: return SampleCheck{"ks", dkw_bound(N, 0.99)};
    default: return std::nullopt;
  }
}

Result cmd_sample(const Common& c, const FamilyOptions& fam, std::size_t N, bool raw) {
  const FamilySpec spec = fam.spec();
  spec.validate();
  auto sample = sample_flip_times(spec, N, c.seed, c.workers);
  Result r;
  r.summary["family"] = spec.describe();
  r.summary["bits"] = spec.bit_count();
  r.summary["N"] = N;
  r.summary["seed"] = c.seed;
  const auto stats = mean_and_stderr(sample.values);
  r.summary["mean_T"] = stats.mean;
  r.summary["stderr_T"] = stats.std_error;

  std::optional<AnalyticLimit> law;
  try {
    law = limit_law(spec);
  } catch (const Unsupported& e) {
    r.summary["limit"] = std::string("none: ") + e.what();
  }
  std::optional<FlipTimeSample> scaled;
  if (law) {
    const auto nb = law->normalization_for(spec);
    scaled = rescale(sample, nb.a, nb.b);
    r.summary["law"] = law->name;
    r.summary["a_n"] = nb.a;
    r.summary["b_n"] = nb.b;
    EmpiricalCdf e(scaled->values);
    const double ks = ks_distance(e, *law);
    r.summary["ks"] = ks;
    r.summary["dkw_99"] = dkw_bound(N, 0.99);
    if (auto check = sample_check(spec.family, N)) {
      json chk;
      chk["kind"] = check->kind;
      chk["tolerance"] = check->tolerance;
      double stat = ks;
      if (check->kind == "point") {
        stat = std::abs(e(check->x) - law->cdf(check->x));
        chk["x"] = check->x;
        chk["empirical"] = e(check->x);
        chk["limit"] = law->cdf(check->x);
      }
      chk["statistic"] = stat;
      chk["pass"] = stat <= check->tolerance;
      r.summary["check"] = chk;
    }
  }
  Table t{{"k", "T", "scaled"}, {}};
  for (std::size_t k = 0; k < N; ++k) {
    Cell s;
    if (scaled && !raw) s = scaled->values[k];
    t.add({static_cast<std::int64_t>(k), sample.values[k], s});
  }
  r.files.push_back(table_output(t, c.format));
  return r;
}

FiniteMeasure parse_measure(const std::string& atoms, const std::string& file) {
  std::vector<Atom> list;
  if (!file.empty()) {
    const auto j = nlohmann::json::parse(read_file(file));
    if (!j.contains("atoms") || !j["atoms"].is_array()) {
      throw InvalidArgument("measure file needs an \"atoms\" array of {x, q}");
    }
    for (const auto& a : j["atoms"]) {
      if (!a.is_object() || !a.contains("x") || !a.contains("q") || !a["x"].is_number() ||
          !a["q"].is_number()) {
        throw InvalidArgument("measure atoms must be objects with numeric x and q");
      }
      list.push_back({a["x"].get<double>(), a["q"].get<double>()});
    }
  } else {
    std::stringstream ss(atoms);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw InvalidArgument("atom '" + item + "' is not x:q");
      const auto g = parse_grid(item.substr(0, colon));
      const auto w = parse_grid(item.substr(colon + 1));
      list.push_back({g.at(0), w.at(0)});
    }
  }
  return FiniteMeasure(std::move(list));
}

json describe_construction(const Construction& f) {
  const auto& s = f.spec();
  json j;
  j["schema"] = kFunctionSchema;
  j["name"] = f.name();
  j["mode"] = s.mode == ConstructionMode::kPlain ? "plain" : "transitive";
  j["n"] = s.n;
  j["a_n"] = s.a_n;
  auto atoms = json::array();
  for (const auto& a : f.measure().atoms()) atoms.push_back({{"x", a.x}, {"q", a.q}});
  j["atoms"] = atoms;
  j["global_counts"] = s.global_counts;
  if (s.mode == ConstructionMode::kPlain) {
    j["block"] = s.block;
    auto y = json::array();
    for (double v : s.quantiles) y.push_back(number(v));
    j["quantiles"] = y;
    j["block_counts"] = s.block_counts;
  } else {
    j["window_length"] = s.length;
    auto th = json::array();
    for (const auto& t : s.thresholds) {
      json e;
      e["bits"] = t.y.bits();
      e["value"] = t.y.value;
      e["target"] = number(t.target);
      e["achieved"] = t.achieved.value;
      e["stderr"] = t.achieved.std_error;
      e["tolerance"] = t.tolerance;
      e["within_tolerance"] = t.within_tolerance;
      e["warning"] = t.warning;
      e["note"] = t.note;
      th.push_back(e);
    }
    j["thresholds"] = th;
    j["calibration_N"] = s.calibration_N;
    j["calibration_seed"] = s.calibration_seed;
  }
  j["scaling"] = {{"ok", s.scaling.ok}, {"warnings", s.scaling.warnings}};
  return j;
}

Result cmd_construct(const Common& c, const std::string& atoms, const std::string& measure_file,
                     std::size_t n, double a_n, const std::string& mode,
                     std::size_t calibration_N, std::size_t N, const std::string& check_x) {
  const auto measure = parse_measure(atoms, measure_file);
  ConstructionPtr f;
  if (mode == "plain") {
    f = build_plain(measure, n, a_n);
  } else if (mode == "transitive") {
    f = build_transitive(measure, n, a_n, TransitiveOptions{calibration_N, c.seed, c.workers});
  } else {
    throw InvalidArgument("mode must be plain or transitive");
  }
  Result r;
  const json descriptor = describe_construction(*f);
  r.summary["function"] = f->name();
  r.summary["scaling_ok"] = f->spec().scaling.ok;
  r.summary["scaling_warnings"] = f->spec().scaling.warnings;
  bool calibration_warning = false;
  for (const auto& t : f->spec().thresholds) calibration_warning = calibration_warning || t.warning;
  r.summary["calibration_warning"] = calibration_warning;
  r.files.push_back({".function.json", descriptor.dump(2) + "\n"});

  if (N > 0) {
    std::vector<double> xs;
    if (!check_x.empty()) {
      xs = parse_grid(check_x);
    } else {
      const auto& a = measure.atoms();
      xs.push_back(a.front().x - 1);
      for (std::size_t i = 0; i + 1 < a.size(); ++i) xs.push_back((a[i].x + a[i + 1].x) / 2);
      xs.push_back(a.back().x + 1);
    }
    const auto sample = f->sample(N, c.seed + 1, c.workers);
    EmpiricalCdf e(sample.values);
    Table t{{"x", "empirical", "target", "diff", "stderr"}, {}};
    double worst = 0;
    for (double x : xs) {
      const double p = e(x);
      const double d = std::abs(p - measure.cdf(x));
      worst = std::max(worst, d);
      t.add({x, p, measure.cdf(x), d, std::sqrt(p * (1 - p) / static_cast<double>(N))});
    }
    r.summary["N"] = N;
    r.summary["max_diff"] = worst;
    r.files.push_back(table_output(t, c.format));
  }
  return r;
}

struct PercolationOptions {
  std::size_t n = 64;
  std::size_t N = 10000;
  std::string r_choice = "empirical";
  double r = 0.0;
  std::size_t r_calibration_N = 2000;
};

double resolve_r(const Common& c, const PercolationOptions& p, json& summary) {
  double r = p.r;
  if (r <= 0) {
    r = percolation::window_scale(p.n, percolation::parse_scale_choice(p.r_choice),
                                  p.r_calibration_N, c.seed ^ 0x5eedULL, c.workers);
    summary["r_choice"] = p.r_choice;
  } else {
    summary["r_choice"] = "explicit";
  }
  summary["r"] = r;
  return r;
}

Result cmd_perc_flip(const Common& c, const PercolationOptions& p, std::size_t bins) {
  Result res;
  const double r = resolve_r(c, p, res.summary);
  auto T = percolation::sample_crossing_flip_times(p.n, p.N, c.seed, c.workers);
  std::vector<double> W(T.size());
  for (std::size_t k = 0; k < T.size(); ++k) W[k] = (T[k] - 0.5) / r;
  Table samples{{"k", "T", "W"}, {}};
  for (std::size_t k = 0; k < T.size(); ++k) samples.add({static_cast<std::int64_t>(k), T[k], W[k]});
  if (bins == 0) throw InvalidArgument("bins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(W.begin(), W.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  std::vector<std::int64_t> counts(bins, 0);
  for (double w : W) {
    auto b = static_cast<std::size_t>((w - lo) / width);
    ++counts[std::min(b, bins - 1)];
  }
  Table hist{{"bin_lo", "bin_hi", "count", "density"}, {}};
  for (std::size_t b = 0; b < bins; ++b) {
    hist.add({lo + width * static_cast<double>(b), lo + width * static_cast<double>(b + 1), counts[b],
              static_cast<double>(counts[b]) / (static_cast<double>(T.size()) * width)});
  }
  EmpiricalCdf e(T);
  res.summary["n"] = p.n;
  res.summary["N"] = p.N;
  res.summary["crossing_at_half"] = e(0.5);
  res.summary["mean_W"] = mean_and_stderr(W).mean;
  res.files.push_back(table_output(hist, c.format));
  res.files.push_back(table_output(samples, c.format, ".samples"));
  return res;
}

Result cmd_perc_lambda(const Common& c, const PercolationOptions& p, const std::string& grid,
                       bool fit) {
  Result res;
  const double r = resolve_r(c, p, res.summary);
  const auto lambdas = parse_grid(grid);
  const auto f = percolation::near_critical_crossing_probs(p.n, lambdas, r, p.N, c.seed, c.workers);
  Table t{{"lambda", "f", "stderr", "p", "n", "r"}, {}};
  bool monotone = true;
  for (std::size_t i = 0; i < f.size(); ++i) {
    t.add({lambdas[i], f[i].value, f[i].std_error, 0.5 + lambdas[i] * r,
           static_cast<std::int64_t>(p.n), r});
    if (i > 0 && lambdas[i] >= lambdas[i - 1] && f[i].value < f[i - 1].value) monotone = false;
  }
  res.summary["n"] = p.n;
  res.summary["N"] = p.N;
  res.summary["monotone"] = monotone;
  if (fit) {
    std::vector<double> ls, vs;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (lambdas[i] < 0) {
        ls.push_back(-lambdas[i]);
        vs.push_back(f[i].value);
      }
    }
    const auto tf = percolation::tail_exponent_fit(ls, vs);
    res.summary["tail_fit"] = {{"slope", tf.slope},
                               {"intercept", tf.intercept},
                               {"residual_norm", tf.residual_norm},
                               {"points_used", tf.points_used},
                               {"warnings", tf.warnings}};
  }
  res.files.push_back(table_output(t, c.format));
  return res;
}

Result cmd_perc_time(const Common& c, const PercolationOptions& p, const std::string& grid) {
  Result res;
  const double r = resolve_r(c, p, res.summary);
  const auto ts = parse_grid(grid);
  const auto g = percolation::dynamical_no_crossing_probs(p.n, ts, r, p.N, c.seed, c.workers);
  Table t{{"t", "g", "stderr", "n", "r"}, {}};
  for (std::size_t i = 0; i < g.size(); ++i) {
    t.add({ts[i], g[i].value, g[i].std_error, static_cast<std::int64_t>(p.n), r});
  }
  res.summary["n"] = p.n;
  res.summary["N"] = p.N;
  res.files.push_back(table_output(t, c.format));
  return res;
}

Result cmd_perc_pivotal(const Common& c, const PercolationOptions& p, const std::string& method) {
  using percolation::PivotalMethod;
  PivotalMethod m;
  if (method == "fast") {
    m = PivotalMethod::kFast;
  } else if (method == "brute") {
    m = PivotalMethod::kBruteForce;
  } else {
    throw InvalidArgument("method must be fast or brute");
  }
  const auto e = percolation::estimate_pivotal_count(p.n, p.N, c.seed, m, c.workers);
  Result res;
  res.summary["n"] = p.n;
  res.summary["N"] = p.N;
  res.summary["mean"] = e.value;
  res.summary["stderr"] = e.std_error;
  Table t{{"n", "N", "mean", "stderr", "method"}, {}};
  t.add({static_cast<std::int64_t>(p.n), static_cast<std::int64_t>(p.N), e.value, e.std_error, method});
  res.files.push_back(table_output(t, c.format));
  return res;
}

// ------------------------------------------------------------- plumbing

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// Every option of the app and of the selected subcommand chain, with its
// final value, as an argument list that reproduces the run. Output
// location, config and help options are left out.
std::vector<std::string> resolved_args(CLI::App& app, json& parameters) {
  std::vector<std::string> args;
  auto emit = [&](CLI::App* a) {
    for (const CLI::Option* opt : a->get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string name = opt->get_lnames().front();
      if (name == "help" || name == "config" || name == "out" || name == "version") continue;
      if (opt->get_expected_min() == 0) {
        if (opt->count() > 0 && opt->as<bool>()) {
          args.push_back("--" + name);
          parameters[name] = true;
        }
        continue;
      }
      std::string value;
      if (!opt->results().empty()) {
        value = opt->as<std::string>();
      } else {
        value = opt->get_default_str();
      }
      if (value.empty()) continue;
      args.push_back("--" + name);
      args.push_back(value);
      parameters[name] = value;
    }
  };
  emit(&app);
  CLI::App* cur = &app;
  for (;;) {
    auto subs = cur->get_subcommands();
    if (subs.empty()) break;
    cur = subs.front();
    args.push_back(cur->get_name());
    emit(cur);
  }
  return args;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kToleranceNotReached: return kExitTolerance;
    case ErrorKind::kNoFlip: return kExitNoFlip;
    default: return kExitValidation;
  }
}

struct Replay {
  std::string manifest;
};

int do_replay(const Replay& rp, const Common& c, bool out_given, std::ostream& out,
              std::ostream& err) {
  const fs::path manifest_path = rp.manifest;
  const auto m = nlohmann::json::parse(read_file(manifest_path));
  if (!m.contains("schema") || m["schema"] != kManifestSchema) {
    err << "replay: " << manifest_path << " is not a run manifest\n";
    return kExitValidation;
  }
  const fs::path dir = out_given ? fs::path(c.out_dir) : manifest_path.parent_path() / "replay";
  std::vector<std::string> args = m["args"].get<std::vector<std::string>>();
  args.insert(args.begin(), {"--out", dir.string()});
  std::ostringstream quiet;
  const int code = run(args, quiet, err);
  if (code != kExitOk) return code;
  json report;
  report["replayed_into"] = dir.string();
  bool identical = true;
  auto files = json::array();
  for (const auto& o : m["outputs"]) {
    const auto name = o["path"].get<std::string>();
    const auto digest = sha256_hex(read_file(dir / name));
    const bool same = digest == o["sha256"].get<std::string>();
    identical = identical && same;
    files.push_back({{"path", name}, {"identical", same}});
  }
  report["files"] = files;
  report["identical"] = identical;
  out << report.dump(2) << "\n";
  return identical ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flip-time scaling limits of monotone Boolean functions", "flipscale"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(FLIPSCALE_VERSION));
  app.set_config("--config", "", "TOML/INI file supplying any option; flags override it");

  Common c;
  app.add_option("--out", c.out_dir, "output directory");
  app.add_option("--prefix", c.prefix, "output file stem (default: command name)");
  app.add_option("--format", c.format, "table format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", c.seed, std::string("base seed (") + kSeedEnv + " overrides the config file)");
  app.add_option("--workers", c.workers, "worker threads, 0 = all cores (results do not depend on it)");

  FamilyOptions lim_f, smp_f;
  std::string xgrid;
  auto* limit = app.add_subcommand("limit", "tabulate the limiting CDF of a family");
  add_family_options(limit, lim_f);
  limit->add_option("--xgrid", xgrid, "a:b:step or comma list (default -3:3:0.1, dictator 0:1:0.1)");

  std::size_t sample_N = 10000;
  bool raw = false;
  auto* sample = app.add_subcommand("sample", "sample flip times and compare with the limit law");
  add_family_options(sample, smp_f);
  sample->add_option("--N", sample_N, "number of samples")->check(CLI::PositiveNumber);
  sample->add_flag("--no-rescale", raw, "leave the scaled column empty");

  std::string atoms = "-1:0.5,1:0.5", measure_file, mode = "plain", check_x;
  std::size_t cons_n = 10000, cal_N = 20000, cons_N = 2000;
  double a_n = 10.0;
  auto* construct = app.add_subcommand("construct", "build a function with a prescribed limit law");
  construct->add_option("--atoms", atoms, "x:q,x:q,... atoms of the target law");
  construct->add_option("--measure", measure_file, "JSON file {\"atoms\": [{\"x\":..,\"q\":..}]}");
  construct->add_option("--n", cons_n, "bit count");
  construct->add_option("--a-n", a_n, "scaling a_n");
  construct->add_option("--mode", mode, "plain | transitive");
  construct->add_option("--calibration-N", cal_N, "Monte Carlo budget for transitive thresholds");
  construct->add_option("--N", cons_N, "verification samples (0 skips)");
  construct->add_option("--check-x", check_x, "x values for the verification table");

  PercolationOptions po;
  auto* perc = app.add_subcommand("percolation", "triangular-lattice crossing experiments");
  perc->require_subcommand(1);
  perc->add_option("--n", po.n, "side length of the rhombus");
  perc->add_option("--N", po.N, "number of samples")->check(CLI::PositiveNumber);
  perc->add_option("--r-choice", po.r_choice, "theoretical | empirical window scale r(n)");
  perc->add_option("--r", po.r, "explicit r(n); overrides --r-choice when > 0");
  perc->add_option("--r-calibration-N", po.r_calibration_N, "samples for the empirical r(n)");
  std::size_t bins = 40;
  auto* p_flip = perc->add_subcommand("flip", "crossing flip times and their histogram");
  p_flip->add_option("--bins", bins, "histogram bins");
  std::string lambdas = "-1.5:1.5:0.25";
  bool fit = false;
  auto* p_lambda = perc->add_subcommand("f-of-lambda", "near-critical crossing probabilities");
  p_lambda->add_option("--lambdas", lambdas, "lambda grid");
  p_lambda->add_flag("--fit", fit, "fit the tail exponent on the negative lambdas");
  std::string ts = "0:10:1";
  auto* p_time = perc->add_subcommand("g-of-t", "dynamical no-crossing probabilities");
  p_time->add_option("--ts", ts, "time grid");
  std::string method = "fast";
  auto* p_piv = perc->add_subcommand("pivotal", "mean number of pivotal sites at p = 1/2");
  p_piv->add_option("--method", method, "fast | brute");

  Replay rp;
  auto* replay = app.add_subcommand("replay", "re-run a manifest and compare output digests");
  replay->add_option("manifest", rp.manifest, "manifest file")->required();

  std::vector<std::string> files;
  auto* validate = app.add_subcommand("validate", "check CSV/JSON outputs against the schema");
  validate->add_option("files", files, "files to check")->required();

  for (auto* s : {limit, sample, construct, perc, p_flip, p_lambda, p_time, p_piv, replay, validate}) {
    s->fallthrough();
  }

  std::vector<std::string> args = raw_args;
  const bool seed_flag = std::any_of(args.begin(), args.end(), [](const std::string& a) {
    return a == "--seed" || a.rfind("--seed=", 0) == 0;
  });
  if (const char* env = std::getenv(kSeedEnv); env && *env && !seed_flag) {
    args.insert(args.begin(), std::string("--seed=") + env);
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (validate->parsed()) {
      bool ok = true;
      for (const auto& f : files) {
        const auto problems = validate_file(f);
        for (const auto& p : problems) err << f << ": " << p << "\n";
        ok = ok && problems.empty();
      }
      out << (ok ? "valid" : "invalid") << "\n";
      return ok ? kExitOk : kExitValidation;
    }
    if (replay->parsed()) {
      return do_replay(rp, c, app.get_option("--out")->count() > 0, out, err);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    json parameters = json::object();
    const auto resolved = resolved_args(app, parameters);

    Result result;
    std::string command;
    if (limit->parsed()) {
      command = "limit";
      result = cmd_limit(c, lim_f, xgrid, c.format);
    } else if (sample->parsed()) {
      command = "sample";
      result = cmd_sample(c, smp_f, sample_N, raw);
    } else if (construct->parsed()) {
      command = "construct";
      result = cmd_construct(c, atoms, measure_file, cons_n, a_n, mode, cal_N, cons_N, check_x);
    } else if (p_flip->parsed()) {
      command = "percolation-flip";
      result = cmd_perc_flip(c, po, bins);
    } else if (p_lambda->parsed()) {
      command = "percolation-f-of-lambda";
      result = cmd_perc_lambda(c, po, lambdas, fit);
    } else if (p_time->parsed()) {
      command = "percolation-g-of-t";
      result = cmd_perc_time(c, po, ts);
    } else {
      command = "percolation-pivotal";
      result = cmd_perc_pivotal(c, po, method);
    }

    const std::string stem = c.prefix.empty() ? command : c.prefix;
    const fs::path dir = c.out_dir;
    json manifest;
    manifest["schema"] = kManifestSchema;
    manifest["version"] = FLIPSCALE_VERSION;
    manifest["command"] = command;
    manifest["args"] = resolved;
    manifest["parameters"] = parameters;
    manifest["seed"] = c.seed;
    manifest["started_utc"] = started;
    auto outputs = json::array();
    for (const auto& f : result.files) {
      const std::string name = stem + f.suffix;
      write_file(dir / name, f.bytes);
      outputs.push_back({{"path", name}, {"sha256", sha256_hex(f.bytes)}, {"bytes", f.bytes.size()}});
    }
    manifest["outputs"] = outputs;
    manifest["summary"] = result.summary;
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const fs::path manifest_path = dir / (stem + ".manifest.json");
    write_file(manifest_path, manifest.dump(2) + "\n");

    json report = result.summary;
    report["command"] = command;
    report["manifest"] = manifest_path.string();
    out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace flipscale::cli
