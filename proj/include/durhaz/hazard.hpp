// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "durhaz/core.hpp"
#include "durhaz/errors.hpp"

namespace durhaz {

// Discrete-time hazard math. For a phone duration D with per-frame transition
// probabilities pi_1, pi_2, ... the induced quantities are
//
//   P(D = n)  =  pi_n * prod_{k<n} (1 - pi_k)          (the PMF)
//   P(D > n)  =  prod_{k<=n} (1 - pi_k)                (the survival mass)
//
// and the q-quantile is the smallest n whose survival mass drops to 1-q or
// below. All arithmetic is double precision with running products; at the
// default cap of 300 frames products stay far above underflow.

/// Clamps a raw predictor output into the legal hazard range. The ceiling
/// stays fractionally below one so a clamped sequence can always be extended;
/// an exact 1.0 is only ever forced at the truncation cap.
inline double clamp_hazard(double p) {
  return std::clamp(p, kHazardFloor, 1.0 - kHazardFloor);
}

inline void check_hazard_prob(double p) {
  if (!(p >= kHazardFloor && p <= 1.0)) {
    throw InvalidHazardError("transition probability " + std::to_string(p) +
                             " outside [" + std::to_string(kHazardFloor) + ", 1]");
  }
}

/// Builds a HazardSequence, validating the range and computing the running
/// survival products.
inline HazardSequence make_hazard_sequence(std::vector<double> probs) {
  HazardSequence h;
  h.survival.reserve(probs.size());
  double surv = 1.0;
  for (double p : probs) {
    check_hazard_prob(p);
    surv *= (1.0 - p);
    h.survival.push_back(surv);
  }
  h.probs = std::move(probs);
  return h;
}

/// Survival masses P(D > n) for n = 1..len(probs), by running product.
inline std::vector<double> survival_from_hazard(const HazardSequence& h) {
  if (h.probs.empty()) {
    throw InvalidArgumentError("survival_from_hazard: empty hazard sequence");
  }
  std::vector<double> out;
  out.reserve(h.probs.size());
  double surv = 1.0;
  for (double p : h.probs) {
    check_hazard_prob(p);
    surv *= (1.0 - p);
    out.push_back(surv);
  }
  return out;
}

/// The duration PMF induced by a hazard sequence, truncated at `cap`: the
/// entry at cap absorbs all mass not assigned to shorter durations, so the
/// result always sums to one.
inline DurationDistribution pmf_from_hazard(const HazardSequence& h, int cap) {
  if (cap < 1) {
    throw InvalidArgumentError("pmf_from_hazard: cap must be >= 1, got " +
                               std::to_string(cap));
  }
  for (double p : h.probs) check_hazard_prob(p);
  DurationDistribution dist;
  dist.cap = cap;
  double surv = 1.0;  // mass surviving past duration d-1
  for (int d = 1; d < cap; ++d) {
    if (surv == 0.0) break;
    if (static_cast<std::size_t>(d) > h.probs.size()) {
      throw InvalidArgumentError(
          "pmf_from_hazard: hazard sequence too short for cap without a "
          "terminal probability of 1");
    }
    const double p = h.probs[d - 1];
    const double mass = surv * p;
    if (mass > 0.0) dist.pmf[d] = mass;
    surv *= (1.0 - p);
  }
  if (surv > 0.0) dist.pmf[cap] += surv;  // truncation mass
  return dist;
}

inline void check_distribution(const DurationDistribution& dist) {
  double sum = 0.0;
  for (const auto& [d, p] : dist.pmf) {
    if (d < 1 || d > dist.cap) {
      throw InvalidArgumentError("duration distribution: support value " +
                                 std::to_string(d) + " outside [1, " +
                                 std::to_string(dist.cap) + "]");
    }
    if (p < 0.0) {
      throw InvalidArgumentError("duration distribution: negative probability at " +
                                 std::to_string(d));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidArgumentError("duration distribution: mass sums to " +
                               std::to_string(sum) + ", not 1");
  }
}

/// Inverse of pmf_from_hazard: recovers the transition probabilities
/// pi_d = P(D = d) / P(D >= d). Hazards below the floor are lifted to it and
/// the final support point is forced to 1 so the result is a valid sequence.
inline HazardSequence hazard_from_pmf(const DurationDistribution& dist) {
  check_distribution(dist);
  if (dist.pmf.empty()) {
    throw InvalidArgumentError("hazard_from_pmf: empty distribution");
  }
  const int last = dist.pmf.rbegin()->first;
  // P(D >= d) as suffix sums of the PMF. Every addend is non-negative, so
  // unlike a running 1 - CDF(d-1) there is no cancellation and the relative
  // error stays at summation level even deep into the tail.
  std::vector<double> tail_mass(static_cast<std::size_t>(last) + 2, 0.0);
  std::vector<double> mass(static_cast<std::size_t>(last) + 1, 0.0);
  for (const auto& [d, p] : dist.pmf) mass[static_cast<std::size_t>(d)] = p;
  for (int d = last; d >= 1; --d) {
    tail_mass[d] = tail_mass[d + 1] + mass[d];
  }
  std::vector<double> probs;
  probs.reserve(static_cast<std::size_t>(last));
  double cdf_before = 0.0;
  for (int d = 1; d <= last; ++d) {
    // A front-measured remainder of zero with meaningful mass still ahead
    // means the PMF is internally inconsistent.
    if (1.0 - cdf_before <= 1e-13 && tail_mass[d] > 1e-11) {
      throw DegenerateDistributionError(
          "hazard_from_pmf: probability mass exhausted before duration " +
          std::to_string(d));
    }
    if (tail_mass[d] <= 0.0) {
      probs.push_back(1.0);
      cdf_before += mass[d];
      continue;
    }
    double pi = (d == last) ? 1.0 : mass[d] / tail_mass[d];
    pi = std::min(1.0, std::max(pi, kHazardFloor));
    probs.push_back(pi);
    cdf_before += mass[d];
  }
  return make_hazard_sequence(std::move(probs));
}

/// Mean of a cap-truncated PMF. With infinite support the mean is not
/// computable from a prefix; this is the capped version used for offline
/// comparisons only.
inline double truncated_mean_from_pmf(const DurationDistribution& dist) {
  check_distribution(dist);
  double mean = 0.0;
  for (const auto& [d, p] : dist.pmf) mean += static_cast<double>(d) * p;
  return mean;
}

struct QuantileResult {
  int duration = 0;
  bool truncated = false;
};

/// Generalised quantile from a stream of survival masses: the smallest n with
/// P(D > n) <= 1 - q, consuming one value per step. `next_survival(n)` must
/// return P(D > n) for n = 1, 2, ... in order. If the threshold is not
/// reached by `cap`, returns cap with the truncation flag set. The q = 0.5
/// case is median-based generation; the comparison is inclusive, so a
/// survival mass of exactly 1 - q triggers the transition.
template <typename SurvivalSource>
inline QuantileResult quantile_from_survival_stream(SurvivalSource&& next_survival,
                                                    double q, int cap) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidArgumentError("quantile must lie in (0, 1), got " + std::to_string(q));
  }
  if (cap < 1) {
    throw InvalidArgumentError("quantile cap must be >= 1, got " + std::to_string(cap));
  }
  const double threshold = 1.0 - q;
  for (int n = 1; n <= cap; ++n) {
    const double surv = next_survival(n);
    if (surv <= threshold) return {n, false};
  }
  return {cap, true};
}

/// Quantile of the distribution induced by a hazard sequence. Survival masses
/// are produced on the fly from the running product; positions beyond the
/// sequence are treated as certain transition (the cap convention).
inline QuantileResult quantile_from_survival(const HazardSequence& h, double q, int cap) {
  double surv = 1.0;
  std::size_t i = 0;
  return quantile_from_survival_stream(
      [&](int) {
        const double p = (i < h.probs.size()) ? h.probs[i] : 1.0;
        ++i;
        check_hazard_prob(p);
        surv *= (1.0 - p);
        return surv;
      },
      q, cap);
}

}  // namespace durhaz
