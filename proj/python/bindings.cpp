#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flipscale/constructor.hpp"
#include "flipscale/errors.hpp"
#include "flipscale/families.hpp"
#include "flipscale/itermaj.hpp"
#include "flipscale/montecarlo.hpp"
#include "flipscale/percolation.hpp"

namespace py = pybind11;
using namespace flipscale;

namespace {

py::array_t<double> to_array(std::vector<double> v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FamilySpec make_spec(const std::string& family, std::size_t n, double p_bias, int m, int height,
                     std::size_t vertices, double clique_p, std::optional<std::size_t> clique_size,
                     std::optional<double> clique_pn, std::optional<double> clique_lambda,
                     bool constant_value) {
  FamilySpec s;
  s.family = parse_family(family);
  s.n = n;
  s.p_bias = p_bias;
  s.m = m;
  s.height = height;
  s.vertices = vertices;
  s.clique_p = clique_p;
  s.clique_size_override = clique_size;
  s.clique_pn = clique_pn;
  s.clique_lambda = clique_lambda;
  s.constant_value = constant_value;
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Flip-time scaling limits of monotone Boolean functions";
  mod.attr("__version__") = FLIPSCALE_VERSION;

  static py::exception<Error> base(mod, "FlipscaleError", PyExc_RuntimeError);
  static py::exception<NoFlip> no_flip(mod, "NoFlipError", base.ptr());
  static py::exception<ToleranceNotReached> tolerance(mod, "ToleranceNotReachedError", base.ptr());
  static py::exception<Unsupported> unsupported(mod, "UnsupportedError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const NoFlip& e) {
      py::set_error(no_flip, e.what());
    } catch (const ToleranceNotReached& e) {
      py::set_error(tolerance, e.what());
    } catch (const Unsupported& e) {
      py::set_error(unsupported, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<FamilySpec>(mod, "FamilySpec")
      .def(py::init(&make_spec), py::arg("family"), py::arg("n") = 0, py::arg("p_bias") = 0.5,
           py::arg("m") = 3, py::arg("height") = 1, py::arg("vertices") = 0,
           py::arg("clique_p") = 0.5, py::arg("clique_size") = py::none(),
           py::arg("clique_pn") = py::none(), py::arg("clique_lambda") = py::none(),
           py::arg("constant_value") = false)
      .def_property_readonly("family", [](const FamilySpec& s) { return std::string(to_string(s.family)); })
      .def_property_readonly("bit_count", &FamilySpec::bit_count)
      .def("describe", &FamilySpec::describe)
      .def("__repr__", [](const FamilySpec& s) { return "FamilySpec(" + s.describe() + ")"; });

  mod.def(
      "flip_time",
      [](const FamilySpec& spec, std::vector<double> labels) {
        return flip_time(*make_family(spec), labels).value;
      },
      py::arg("spec"), py::arg("labels"), "Flip time of the family for the given bit labels.");

  mod.def(
      "sample_flip_times",
      [](const FamilySpec& spec, std::size_t N, std::uint64_t seed, unsigned workers) {
        std::vector<double> v;
        {
          py::gil_scoped_release release;
          v = sample_flip_times(spec, N, seed, workers).values;
        }
        return to_array(std::move(v));
      },
      py::arg("spec"), py::arg("N"), py::arg("seed") = 1, py::arg("workers") = 0);

  mod.def(
      "limit_cdf",
      [](const FamilySpec& spec, std::vector<double> xs) {
        const auto law = limit_law(spec);
        std::vector<double> out;
        for (double x : xs) out.push_back(law.cdf(x));
        return to_array(std::move(out));
      },
      py::arg("spec"), py::arg("xs"));

  mod.def(
      "normalization",
      [](const FamilySpec& spec) {
        const auto nb = limit_law(spec).normalization_for(spec);
        return py::make_tuple(nb.a, nb.b);
      },
      py::arg("spec"), "(a_n, b_n) with a_n (T - b_n) approaching the limit law.");

  mod.def(
      "ks_distance",
      [](std::vector<double> sample, const FamilySpec& spec) {
        return ks_distance(EmpiricalCdf(std::move(sample)), limit_law(spec));
      },
      py::arg("rescaled_sample"), py::arg("spec"));
  mod.def("dkw_bound", &dkw_bound, py::arg("N"), py::arg("confidence"));

  mod.def("itermaj_gamma", &itermaj::gamma, py::arg("m"));
  mod.def("itermaj_beta", &itermaj::beta, py::arg("m"));
  mod.def(
      "itermaj_limit",
      [](int m, std::vector<double> alphas) {
        itermaj::Params p;
        p.m = m;
        itermaj::LimitFunction L(p);
        std::vector<double> out;
        for (double a : alphas) out.push_back(L(a));
        return to_array(std::move(out));
      },
      py::arg("m"), py::arg("alphas"), "L(alpha) of iterated m-majority.");

  py::class_<Construction, std::shared_ptr<Construction>>(mod, "Construction")
      .def_property_readonly("name", [](const Construction& c) { return c.name(); })
      .def_property_readonly("n", [](const Construction& c) { return c.size(); })
      .def_property_readonly("global_counts", [](const Construction& c) { return c.spec().global_counts; })
      .def_property_readonly("thresholds", [](const Construction& c) {
        std::vector<std::string> bits;
        for (const auto& t : c.spec().thresholds) bits.push_back(t.y.bits());
        return bits;
      })
      .def(
          "sample",
          [](const Construction& c, std::size_t N, std::uint64_t seed, unsigned workers) {
            std::vector<double> v;
            {
              py::gil_scoped_release release;
              v = c.sample(N, seed, workers).values;
            }
            return to_array(std::move(v));
          },
          py::arg("N"), py::arg("seed") = 1, py::arg("workers") = 0,
          "Rescaled flip times a_n (T - 1/2).");

  auto measure = [](const std::vector<std::pair<double, double>>& atoms) {
    std::vector<Atom> list;
    for (const auto& [x, q] : atoms) list.push_back({x, q});
    return FiniteMeasure(std::move(list));
  };
  mod.def(
      "build_plain",
      [measure](const std::vector<std::pair<double, double>>& atoms, std::size_t n, double a_n) {
        return std::const_pointer_cast<Construction>(build_plain(measure(atoms), n, a_n));
      },
      py::arg("atoms"), py::arg("n"), py::arg("a_n"));
  mod.def(
      "build_transitive",
      [measure](const std::vector<std::pair<double, double>>& atoms, std::size_t n, double a_n,
                std::size_t calibration_N, std::uint64_t seed, unsigned workers) {
        return std::const_pointer_cast<Construction>(
            build_transitive(measure(atoms), n, a_n, TransitiveOptions{calibration_N, seed, workers}));
      },
      py::arg("atoms"), py::arg("n"), py::arg("a_n"), py::arg("calibration_N") = 20000,
      py::arg("seed") = 1, py::arg("workers") = 0);

  auto perc = mod.def_submodule("percolation", "Site percolation on the triangular lattice");
  perc.def(
      "crossing_probabilities",
      [](std::size_t n, std::vector<double> lambdas, double r, std::size_t N, std::uint64_t seed,
         unsigned workers) {
        std::vector<Estimate> est;
        {
          py::gil_scoped_release release;
          est = percolation::near_critical_crossing_probs(n, lambdas, r, N, seed, workers);
        }
        std::vector<double> v;
        for (const auto& e : est) v.push_back(e.value);
        return to_array(std::move(v));
      },
      py::arg("n"), py::arg("lambdas"), py::arg("r"), py::arg("N"), py::arg("seed") = 1,
      py::arg("workers") = 0);
  perc.def(
      "window_scale",
      [](std::size_t n, const std::string& choice, std::size_t calibration_N, std::uint64_t seed,
         unsigned workers) {
        return percolation::window_scale(n, percolation::parse_scale_choice(choice), calibration_N, seed,
                                         workers);
      },
      py::arg("n"), py::arg("choice") = "empirical", py::arg("calibration_N") = 2000,
      py::arg("seed") = 0x5eed, py::arg("workers") = 0);
  perc.def(
      "pivotal_count",
      [](std::size_t n, std::size_t N, std::uint64_t seed, const std::string& method) {
        const auto m = method == "brute" ? percolation::PivotalMethod::kBruteForce
                                         : percolation::PivotalMethod::kFast;
        const auto e = percolation::estimate_pivotal_count(n, N, seed, m);
        return py::make_tuple(e.value, e.std_error);
      },
      py::arg("n"), py::arg("N"), py::arg("seed") = 1, py::arg("method") = "fast");
  perc.def(
      "tail_exponent_fit",
      [](std::vector<double> lambdas, std::vector<double> values) {
        const auto fit = percolation::tail_exponent_fit(lambdas, values);
        return py::make_tuple(fit.slope, fit.intercept);
      },
      py::arg("lambdas"), py::arg("values"));
}
