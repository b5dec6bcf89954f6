// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "durhaz/hazard.hpp"
#include "durhaz/rng.hpp"

using namespace durhaz;

namespace {

// Independent oracle: PMF by explicit term-by-term cumulative product,
// written without reference to the library's running-product code path.
std::vector<double> oracle_pmf(const std::vector<double>& probs, int cap) {
  std::vector<double> pmf(static_cast<std::size_t>(cap) + 1, 0.0);
  for (int d = 1; d < cap; ++d) {
    double prod = 1.0;
    for (int k = 1; k < d; ++k) prod *= (1.0 - probs[k - 1]);
    pmf[d] = probs[d - 1] * prod;
  }
  double tail = 1.0;
  for (int k = 1; k < cap; ++k) tail *= (1.0 - probs[k - 1]);
  pmf[cap] = tail;
  return pmf;
}

// Independent oracle: survival by plain running product.
std::vector<double> oracle_survival(const std::vector<double>& probs) {
  std::vector<double> s;
  double prod = 1.0;
  for (double p : probs) {
    prod *= (1.0 - p);
    s.push_back(prod);
  }
  return s;
}

// Brute-force median: smallest d with CDF(d) >= q over an explicit PMF.
int oracle_quantile(const DurationDistribution& dist, double q) {
  double cdf = 0.0;
  for (const auto& [d, p] : dist.pmf) {
    cdf += p;
    if (cdf >= q) return d;
  }
  return dist.cap;
}

std::vector<double> random_hazard_seq(Rng& rng, int min_len = 1, int max_len = 40) {
  const int len = static_cast<int>(rng.uniform_int(min_len, max_len));
  std::vector<double> probs;
  for (int i = 0; i < len - 1; ++i) probs.push_back(rng.uniform(0.01, 0.99));
  probs.push_back(1.0);
  return probs;
}

}  // namespace

TEST_CASE("pmf_from_hazard: certain transition") {
  auto dist = pmf_from_hazard(make_hazard_sequence({1.0}), 1);
  REQUIRE(dist.pmf.size() == 1);
  CHECK(dist.pmf.at(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pmf_from_hazard: constant hazard telescopes") {
  auto dist = pmf_from_hazard(make_hazard_sequence({0.5, 0.5, 1.0}), 3);
  CHECK(dist.pmf.at(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dist.pmf.at(2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(dist.pmf.at(3) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("pmf_from_hazard matches cumulative-product oracle") {
  std::vector<double> probs{0.2, 0.3, 0.5, 1.0};
  auto expect = oracle_pmf(probs, 4);
  // hand-checked: 0.2, 0.8*0.3 = 0.24, 0.8*0.7*0.5 = 0.28, remainder 0.28
  CHECK(expect[1] == doctest::Approx(0.2));
  CHECK(expect[2] == doctest::Approx(0.24));
  CHECK(expect[3] == doctest::Approx(0.28));
  CHECK(expect[4] == doctest::Approx(0.28));

  auto dist = pmf_from_hazard(make_hazard_sequence(probs), 4);
  for (int d = 1; d <= 4; ++d) {
    CHECK(dist.pmf.at(d) == doctest::Approx(expect[d]).epsilon(1e-12));
  }
}

TEST_CASE("pmf_from_hazard: terminal certainty before the cap") {
  // a sequence ending in 1.0 may be shorter than the cap; later durations
  // carry no mass and the cap entry absorbs nothing
  auto dist = pmf_from_hazard(make_hazard_sequence({0.3, 1.0}), 5);
  CHECK(dist.pmf.at(1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(dist.pmf.at(2) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(dist.pmf.count(3) == 0);
  CHECK(dist.pmf.count(5) == 0);
  double sum = 0.0;
  for (const auto& [d, m] : dist.pmf) sum += m;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pmf_from_hazard: errors") {
  CHECK_THROWS_AS(pmf_from_hazard(make_hazard_sequence({0.5, 1.0}), 0),
                  InvalidArgumentError);
  HazardSequence bad;
  bad.probs = {0.5, 1.5};
  CHECK_THROWS_AS(pmf_from_hazard(bad, 2), InvalidHazardError);
  bad.probs = {0.5, 0.0};
  CHECK_THROWS_AS(pmf_from_hazard(bad, 2), InvalidHazardError);
  // too short for the cap and no terminal certainty
  HazardSequence short_seq;
  short_seq.probs = {0.5};
  CHECK_THROWS_AS(pmf_from_hazard(short_seq, 5), InvalidArgumentError);
}

TEST_CASE("survival_from_hazard basics") {
  auto s1 = survival_from_hazard(make_hazard_sequence({1.0}));
  REQUIRE(s1.size() == 1);
  CHECK(s1[0] == doctest::Approx(0.0));

  auto s2 = survival_from_hazard(make_hazard_sequence({0.5, 0.5}));
  CHECK(s2[0] == doctest::Approx(0.5));
  CHECK(s2[1] == doctest::Approx(0.25));

  std::vector<double> probs{0.2, 0.3, 0.5};
  auto expect = oracle_survival(probs);
  CHECK(expect[0] == doctest::Approx(0.8));
  CHECK(expect[1] == doctest::Approx(0.56));
  CHECK(expect[2] == doctest::Approx(0.28));
  auto got = survival_from_hazard(make_hazard_sequence(probs));
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(survival_from_hazard(HazardSequence{}), InvalidArgumentError);
}

TEST_CASE("quantile_from_survival: worked cases") {
  CHECK(quantile_from_survival(make_hazard_sequence({0.5, 0.5, 1.0}), 0.5, 300).duration == 1);

  // deterministic duration 3 once the floor is applied to zero hazards
  auto h = make_hazard_sequence({kHazardFloor, kHazardFloor, 1.0});
  CHECK(quantile_from_survival(h, 0.5, 300).duration == 3);

  auto g = make_hazard_sequence({0.2, 0.3, 0.5});
  CHECK(quantile_from_survival(g, 0.5, 300).duration == 3);

  CHECK_THROWS_AS(quantile_from_survival(g, 0.0, 300), InvalidArgumentError);
  CHECK_THROWS_AS(quantile_from_survival(g, 1.0, 300), InvalidArgumentError);
}

TEST_CASE("quantile_from_survival: truncation flag") {
  // hazard stuck at the floor: survival never reaches 0.5 within a small cap
  std::vector<double> probs(10, kHazardFloor);
  auto h = make_hazard_sequence(probs);
  auto r = quantile_from_survival(h, 0.5, 10);
  CHECK(r.duration == 10);
  CHECK(r.truncated);
  // exact boundary counts as a transition (inclusive rule)
  auto exact = quantile_from_survival_stream([](int) { return 0.5; }, 0.5, 10);
  CHECK(exact.duration == 1);
  CHECK_FALSE(exact.truncated);
}

TEST_CASE("hazard_from_pmf: worked cases") {
  DurationDistribution unit;
  unit.cap = 1;
  unit.pmf[1] = 1.0;
  auto h = hazard_from_pmf(unit);
  REQUIRE(h.probs.size() == 1);
  CHECK(h.probs[0] == doctest::Approx(1.0));

  // inverse of the pmf_from_hazard worked example
  DurationDistribution d4;
  d4.cap = 4;
  d4.pmf = {{1, 0.2}, {2, 0.24}, {3, 0.28}, {4, 0.28}};
  auto h4 = hazard_from_pmf(d4);
  REQUIRE(h4.probs.size() == 4);
  CHECK(h4.probs[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(h4.probs[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(h4.probs[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h4.probs[3] == doctest::Approx(1.0));
}

TEST_CASE("hazard_from_pmf: truncated geometric has constant hazard") {
  // closed form: geometric(p) has hazard p at every duration
  const double p = 0.3;
  const int cap = 50;
  DurationDistribution dist;
  dist.cap = cap;
  double tail = 1.0;
  for (int d = 1; d < cap; ++d) {
    dist.pmf[d] = p * std::pow(1.0 - p, d - 1);
    tail *= (1.0 - p);
  }
  dist.pmf[cap] = tail;
  auto h = hazard_from_pmf(dist);
  REQUIRE(h.probs.size() == static_cast<std::size_t>(cap));
  for (int d = 1; d < cap; ++d) {
    CHECK(h.probs[d - 1] == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(h.probs[cap - 1] == doctest::Approx(1.0));
}

TEST_CASE("hazard_from_pmf: degenerate distribution detected") {
  DurationDistribution dist;
  dist.cap = 4;
  dist.pmf = {{1, 1.0}, {2, 1e-10}};  // still sums to 1 within 1e-9
  CHECK_THROWS_AS(hazard_from_pmf(dist), DegenerateDistributionError);
}

TEST_CASE("truncated_mean_from_pmf") {
  DurationDistribution unit;
  unit.cap = 1;
  unit.pmf[1] = 1.0;
  CHECK(truncated_mean_from_pmf(unit) == doctest::Approx(1.0));

  DurationDistribution two;
  two.cap = 20;
  two.pmf = {{5, 0.6}, {15, 0.4}};
  CHECK(truncated_mean_from_pmf(two) == doctest::Approx(9.0));

  // geometric p = 0.3 truncated at 200: closed-form mean 1/p with tail error
  // bounded by the absorbed mass
  const double p = 0.3;
  const int cap = 200;
  DurationDistribution geo;
  geo.cap = cap;
  double tail = 1.0;
  for (int d = 1; d < cap; ++d) {
    geo.pmf[d] = p * std::pow(1.0 - p, d - 1);
    tail *= (1.0 - p);
  }
  geo.pmf[cap] = tail;
  CHECK(truncated_mean_from_pmf(geo) == doctest::Approx(1.0 / p).epsilon(0.01 / (1.0 / p)));
}

// ---------------------------------------------------------------------------
// Property tests over randomized hazard sequences.
// ---------------------------------------------------------------------------

TEST_CASE("property: round trip, normalisation, median consistency") {
  Rng rng(20240517);
  for (int iter = 0; iter < 1000; ++iter) {
    auto probs = random_hazard_seq(rng);
    const int cap = static_cast<int>(probs.size());
    auto h = make_hazard_sequence(probs);
    auto dist = pmf_from_hazard(h, cap);

    // conservation of probability mass
    double sum = 0.0;
    for (const auto& [d, m] : dist.pmf) sum += m;
    REQUIRE(std::abs(sum - 1.0) < 1e-9);

    // hazard_from_pmf inverts pmf_from_hazard
    auto back = hazard_from_pmf(dist);
    REQUIRE(back.probs.size() == probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      REQUIRE(std::abs(back.probs[i] - probs[i]) < 1e-9);
    }

    // streaming median equals the brute-force PMF median
    const int stream_median = quantile_from_survival(h, 0.5, cap).duration;
    REQUIRE(stream_median == oracle_quantile(dist, 0.5));
  }
}

TEST_CASE("property: quantile is non-decreasing in q") {
  Rng rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    auto h = make_hazard_sequence(random_hazard_seq(rng));
    const int cap = static_cast<int>(h.probs.size());
    int prev = 0;
    for (double q : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95}) {
      const int d = quantile_from_survival(h, q, cap).duration;
      REQUIRE(d >= prev);
      prev = d;
    }
  }
}

TEST_CASE("property: geometric hazards have median below truncated mean") {
  Rng rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    const double p = rng.uniform(0.02, 0.49);
    std::vector<double> probs(kDefaultCap, p);
    probs.back() = 1.0;
    auto h = make_hazard_sequence(probs);
    auto dist = pmf_from_hazard(h, kDefaultCap);
    const int median = quantile_from_survival(h, 0.5, kDefaultCap).duration;
    const double mean = truncated_mean_from_pmf(dist);
    REQUIRE(static_cast<double>(median) < mean);
  }
}

TEST_CASE("clamp_hazard") {
  CHECK(clamp_hazard(0.0) == kHazardFloor);
  CHECK(clamp_hazard(-3.0) == kHazardFloor);
  CHECK(clamp_hazard(1.0) == 1.0 - kHazardFloor);
  CHECK(clamp_hazard(0.4) == 0.4);
}
