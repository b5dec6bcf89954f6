// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "durhaz/core.hpp"
#include "durhaz/errors.hpp"
#include "durhaz/io.hpp"
#include "durhaz/rng.hpp"

namespace durhaz {

// Duration distribution descriptors for synthetic corpora. Each one has an
// exact PMF (so tests and ground-truth tables never rely on sampling) and a
// deterministic sampler driven by the shared Rng.

struct PointMass {
  int value = 1;
};

/// Support {1, 2, ...}: P(d) = p (1-p)^(d-1).
struct Geometric {
  double p = 0.5;
};

/// Sum of r independent Geometric(p) draws; support starts at r.
struct NegBinomial {
  int r = 1;
  double p = 0.5;
};

/// round(exp(N(mu, sigma^2))) clamped to >= 1; the PMF integrates the
/// log-normal density over each rounding cell.
struct DiscretisedLogNormal {
  double mu = 2.0;
  double sigma = 0.5;
};

using SimpleDurationSpec =
    std::variant<PointMass, Geometric, NegBinomial, DiscretisedLogNormal>;

/// Finite mixture of simple descriptors. Nested mixtures are not supported;
/// a mixture of mixtures is expressible as one flat mixture anyway.
struct Mixture {
  struct Component {
    double weight;
    SimpleDurationSpec dist;
  };
  std::vector<Component> components;
};

using DurationSpecVariant = std::variant<PointMass, Geometric, NegBinomial,
                                         DiscretisedLogNormal, Mixture>;

struct DurationSpec {
  DurationSpecVariant v;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double simple_pmf(const SimpleDurationSpec& s, int d) {
  if (d < 1) return 0.0;
  if (const auto* pm = std::get_if<PointMass>(&s)) {
    return d == pm->value ? 1.0 : 0.0;
  }
  if (const auto* g = std::get_if<Geometric>(&s)) {
    return g->p * std::pow(1.0 - g->p, d - 1);
  }
  if (const auto* nb = std::get_if<NegBinomial>(&s)) {
    if (d < nb->r) return 0.0;
    // iterate the ratio pmf(k+1)/pmf(k) = q * k / (k - r + 1)
    double pmf = std::pow(nb->p, nb->r);
    for (int k = nb->r; k < d; ++k) {
      pmf *= (1.0 - nb->p) * static_cast<double>(k) / static_cast<double>(k - nb->r + 1);
    }
    return pmf;
  }
  const auto& ln = std::get<DiscretisedLogNormal>(s);
  const double hi = normal_cdf((std::log(d + 0.5) - ln.mu) / ln.sigma);
  if (d == 1) return hi;  // everything rounding below 1.5 lands on 1
  const double lo = normal_cdf((std::log(d - 0.5) - ln.mu) / ln.sigma);
  return hi - lo;
}

inline int simple_sample(const SimpleDurationSpec& s, Rng& rng) {
  constexpr int kSampleLimit = 100000;
  if (const auto* pm = std::get_if<PointMass>(&s)) return pm->value;
  if (const auto* g = std::get_if<Geometric>(&s)) {
    if (g->p >= 1.0) return 1;
    const double u = rng.uniform_open();
    const int d = 1 + static_cast<int>(std::floor(std::log(u) / std::log(1.0 - g->p)));
    return std::min(std::max(d, 1), kSampleLimit);
  }
  if (const auto* nb = std::get_if<NegBinomial>(&s)) {
    int total = 0;
    for (int i = 0; i < nb->r; ++i) {
      total += simple_sample(Geometric{nb->p}, rng);
    }
    return std::min(total, kSampleLimit);
  }
  const auto& ln = std::get<DiscretisedLogNormal>(s);
  const double x = std::exp(rng.normal(ln.mu, ln.sigma));
  const long long d = std::llround(x);
  return static_cast<int>(std::min<long long>(std::max<long long>(d, 1), kSampleLimit));
}

inline void validate_simple(const SimpleDurationSpec& s) {
  if (const auto* pm = std::get_if<PointMass>(&s)) {
    if (pm->value < 1) throw InvalidArgumentError("point mass duration must be >= 1");
  } else if (const auto* g = std::get_if<Geometric>(&s)) {
    if (!(g->p > 0.0 && g->p <= 1.0)) {
      throw InvalidArgumentError("geometric p must lie in (0, 1]");
    }
  } else if (const auto* nb = std::get_if<NegBinomial>(&s)) {
    if (nb->r < 1) throw InvalidArgumentError("negbinomial r must be >= 1");
    if (!(nb->p > 0.0 && nb->p <= 1.0)) {
      throw InvalidArgumentError("negbinomial p must lie in (0, 1]");
    }
  } else {
    const auto& ln = std::get<DiscretisedLogNormal>(s);
    if (!(ln.sigma > 0.0)) throw InvalidArgumentError("lognormal sigma must be > 0");
  }
}

/// Non-mixture view of a descriptor variant; callers handle Mixture first.
inline SimpleDurationSpec as_simple(const DurationSpecVariant& v) {
  if (const auto* pm = std::get_if<PointMass>(&v)) return *pm;
  if (const auto* g = std::get_if<Geometric>(&v)) return *g;
  if (const auto* nb = std::get_if<NegBinomial>(&v)) return *nb;
  return std::get<DiscretisedLogNormal>(v);
}

}  // namespace detail

inline void validate_duration_spec(const DurationSpec& spec) {
  if (const auto* mix = std::get_if<Mixture>(&spec.v)) {
    if (mix->components.empty()) throw InvalidArgumentError("mixture has no components");
    double wsum = 0.0;
    for (const auto& c : mix->components) {
      if (c.weight < 0.0) throw InvalidArgumentError("mixture weight must be >= 0");
      detail::validate_simple(c.dist);
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
      throw InvalidArgumentError("mixture weights sum to " + std::to_string(wsum) +
                                 ", not 1");
    }
    return;
  }
  detail::validate_simple(detail::as_simple(spec.v));
}

/// Exact untruncated PMF at duration d.
inline double spec_pmf(const DurationSpec& spec, int d) {
  if (const auto* mix = std::get_if<Mixture>(&spec.v)) {
    double acc = 0.0;
    for (const auto& c : mix->components) acc += c.weight * detail::simple_pmf(c.dist, d);
    return acc;
  }
  return detail::simple_pmf(detail::as_simple(spec.v), d);
}

/// PMF truncated at `cap`, with all mass at or beyond the cap absorbed into
/// the cap entry (same convention as pmf_from_hazard). Throws when the
/// descriptor puts no mass on [1, cap].
inline DurationDistribution spec_pmf_capped(const DurationSpec& spec, int cap) {
  if (cap < 1) throw InvalidArgumentError("cap must be >= 1");
  validate_duration_spec(spec);
  DurationDistribution dist;
  dist.cap = cap;
  double below_cap = 0.0;
  for (int d = 1; d < cap; ++d) {
    const double m = spec_pmf(spec, d);
    if (m > 0.0) dist.pmf[d] = m;
    below_cap += m;
  }
  if (below_cap + spec_pmf(spec, cap) <= 1e-12) {
    throw InvalidArgumentError(
        "duration descriptor has no probability mass on [1, cap]");
  }
  const double tail = 1.0 - below_cap;
  if (tail > 0.0) dist.pmf[cap] = tail;
  return dist;
}

inline int sample_duration(const DurationSpec& spec, Rng& rng) {
  if (const auto* mix = std::get_if<Mixture>(&spec.v)) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& c : mix->components) {
      acc += c.weight;
      if (u < acc) return detail::simple_sample(c.dist, rng);
    }
    return detail::simple_sample(mix->components.back().dist, rng);
  }
  return detail::simple_sample(detail::as_simple(spec.v), rng);
}

/// Smallest d with CDF(d) >= q.
inline int true_quantile(const DurationSpec& spec, double q) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgumentError("quantile must lie in (0, 1)");
  double cdf = 0.0;
  for (int d = 1; d <= 1000000; ++d) {
    cdf += spec_pmf(spec, d);
    if (cdf >= q) return d;
  }
  throw InvalidArgumentError("quantile not reached; descriptor mass too far out");
}

inline int true_median(const DurationSpec& spec) { return true_quantile(spec, 0.5); }

// ---------------------------------------------------------------------------
// Text form used in config files and ground-truth tables, e.g.
//   "pointmass 7" | "geometric 0.3" | "negbinomial 3 0.4"
//   | "lognormal 2.0 0.8" | "mixture 0.6 pointmass 5 : 0.4 pointmass 15"
// ---------------------------------------------------------------------------

namespace detail {

inline SimpleDurationSpec parse_simple_tokens(const std::vector<std::string>& toks,
                                              std::size_t& i) {
  auto need = [&](std::size_t n) {
    if (i + n > toks.size()) {
      throw ParseError("duration descriptor: missing parameters");
    }
  };
  const std::string kind = toks[i++];
  try {
    if (kind == "pointmass") {
      need(1);
      return PointMass{std::stoi(toks[i++])};
    }
    if (kind == "geometric") {
      need(1);
      return Geometric{std::stod(toks[i++])};
    }
    if (kind == "negbinomial") {
      need(2);
      const int r = std::stoi(toks[i++]);
      return NegBinomial{r, std::stod(toks[i++])};
    }
    if (kind == "lognormal") {
      need(2);
      const double mu = std::stod(toks[i++]);
      return DiscretisedLogNormal{mu, std::stod(toks[i++])};
    }
  } catch (const std::invalid_argument&) {
    throw ParseError("duration descriptor: bad numeric parameter near '" + kind + "'");
  }
  throw ParseError("unknown duration descriptor kind '" + kind + "'");
}

inline std::string simple_to_string(const SimpleDurationSpec& s) {
  if (const auto* pm = std::get_if<PointMass>(&s)) {
    return "pointmass " + std::to_string(pm->value);
  }
  if (const auto* g = std::get_if<Geometric>(&s)) {
    return "geometric " + fmt_double_exact(g->p);
  }
  if (const auto* nb = std::get_if<NegBinomial>(&s)) {
    return "negbinomial " + std::to_string(nb->r) + " " + fmt_double_exact(nb->p);
  }
  const auto& ln = std::get<DiscretisedLogNormal>(s);
  return "lognormal " + fmt_double_exact(ln.mu) + " " + fmt_double_exact(ln.sigma);
}

}  // namespace detail

inline DurationSpec parse_duration_spec(const std::string& text) {
  const auto toks = split_ws(text);
  if (toks.empty()) throw ParseError("empty duration descriptor");
  DurationSpec spec;
  if (toks[0] == "mixture") {
    Mixture mix;
    std::size_t i = 1;
    while (i < toks.size()) {
      Mixture::Component comp;
      try {
        comp.weight = std::stod(toks[i++]);
      } catch (const std::invalid_argument&) {
        throw ParseError("mixture: expected component weight, got '" + toks[i - 1] + "'");
      }
      comp.dist = detail::parse_simple_tokens(toks, i);
      mix.components.push_back(comp);
      if (i < toks.size()) {
        if (toks[i] != ":") {
          throw ParseError("mixture: expected ':' between components");
        }
        ++i;
      }
    }
    spec.v = mix;
  } else {
    std::size_t i = 0;
    const auto simple = detail::parse_simple_tokens(toks, i);
    if (i != toks.size()) throw ParseError("trailing tokens in duration descriptor");
    std::visit([&](const auto& s) { spec.v = s; }, simple);
  }
  validate_duration_spec(spec);
  return spec;
}

inline std::string to_string(const DurationSpec& spec) {
  if (const auto* mix = std::get_if<Mixture>(&spec.v)) {
    std::string out = "mixture";
    for (std::size_t i = 0; i < mix->components.size(); ++i) {
      out += (i == 0 ? " " : " : ");
      out += fmt_double_exact(mix->components[i].weight) + " " +
             detail::simple_to_string(mix->components[i].dist);
    }
    return out;
  }
  return detail::simple_to_string(detail::as_simple(spec.v));
}

}  // namespace durhaz
