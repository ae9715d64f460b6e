#pragma once

// Boolean-function families and their limit laws for the rescaled flip time
// a_n (T_n - b_n).

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flipscale/coupling.hpp"

namespace flipscale {

enum class Family {
  kMajority,
  kTribes,
  kCircularTribes,
  kIteratedMajority,
  kTriangle,
  kConnectivity,
  kClique,
  kDictator,
  kOr,
  kAnd,
  kAndMajorityDictator,
  kConstant,
};

std::string_view to_string(Family f);
// Accepts the names printed by to_string plus "itermaj". Throws
// InvalidArgument for unknown names.
Family parse_family(std::string_view name);

struct FamilySpec {
  Family family = Family::kMajority;
  // Bit count for majority, tribes, circular tribes, dictator, or, and,
  // and-majority-dictator and constant.
  std::size_t n = 0;
  double p_bias = 0.5;  // majority: output 1 iff #ones >= ceil(p_bias n)
  int m = 3;            // iterated majority arity
  int height = 1;       // iterated majority depth; bits = m^height
  std::size_t vertices = 0;  // graph properties; bits = C(vertices, 2)
  double clique_p = 0.5;     // clique size from clique_size(vertices, clique_p)
  std::optional<std::size_t> clique_size_override;
  // Caller-supplied admissible pair for the clique limit law.
  std::optional<double> clique_pn;
  std::optional<double> clique_lambda;
  bool constant_value = false;

  // Number of input bits.
  std::size_t bit_count() const;
  // Index the normalization is a function of: height for iterated
  // majority, vertex count for graph properties, bit count otherwise.
  std::size_t scale_index() const;
  // Throws InvalidArgument when parameters are inconsistent.
  void validate() const;
  std::string describe() const;
};

// floor(log2 n - log2 log2 n), n >= 2.
std::size_t tribe_length(std::size_t n);
// floor(log2 n), the run length of circular tribes.
std::size_t circular_run_length(std::size_t n);
// Clique order used for the clique family: the largest l with
// C(v, l) p^C(l, 2) >= 1. Throws InvalidArgument for v < 3 or p outside (0,1).
std::size_t clique_size(std::size_t vertices, double p);

// Edge (u, w), u < w, in lexicographic pair order.
std::size_t edge_index(std::size_t vertices, std::size_t u, std::size_t w);

FunctionPtr make_family(const FamilySpec& spec);

struct Normalization {
  double a = 1.0;
  double b = 0.0;
};

struct AnalyticLimit {
  std::string name;
  std::function<double(double)> cdf;
  std::function<double(double)> density;  // may be empty
  std::function<Normalization(std::size_t)> normalization;

  Normalization normalization_for(const FamilySpec& spec) const {
    return normalization(spec.scale_index());
  }
};

// Throws Unsupported for families without a stated limit (circular tribes,
// constant) and for the clique family without clique_pn / clique_lambda.
AnalyticLimit limit_law(const FamilySpec& spec);

}  // namespace flipscale
