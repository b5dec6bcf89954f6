// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "durhaz/core.hpp"
#include "durhaz/errors.hpp"
#include "durhaz/io.hpp"

namespace durhaz {

// Duration evaluation: RMSE and MAE in frames per phone plus Pearson
// correlation of predicted against reference durations, with silence
// excluded and a two-level per-class breakdown (vowels, consonants, then
// consonant subclasses).

struct MetricRow {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> corr;  // empty when either side has zero variance
  std::size_t n = 0;
};

struct MetricReport {
  MetricRow overall;
  std::vector<std::pair<std::string, MetricRow>> by_class;
};

namespace detail {

// Single-pass accumulator; the naive two-pass formulas act as its test
// oracle.
struct MetricAccum {
  std::size_t n = 0;
  double se = 0.0, ae = 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;

  void add(double pred, double ref) {
    ++n;
    const double e = ref - pred;
    se += e * e;
    ae += std::abs(e);
    sx += pred;
    sy += ref;
    sxx += pred * pred;
    syy += ref * ref;
    sxy += pred * ref;
  }

  MetricRow row() const {
    MetricRow r;
    r.n = n;
    if (n == 0) return r;
    const double dn = static_cast<double>(n);
    r.rmse = std::sqrt(se / dn);
    r.mae = ae / dn;
    const double vx = dn * sxx - sx * sx;
    const double vy = dn * syy - sy * sy;
    if (vx > 1e-12 && vy > 1e-12) {
      r.corr = (dn * sxy - sx * sy) / std::sqrt(vx * vy);
    }
    return r;
  }
};

inline bool is_consonant(PhoneticClass c) {
  return c == PhoneticClass::Plosive || c == PhoneticClass::Fricative ||
         c == PhoneticClass::Nasal || c == PhoneticClass::Affricate ||
         c == PhoneticClass::GlideLiquid || c == PhoneticClass::Other;
}

}  // namespace detail

/// Computes overall and per-class metrics over aligned prediction/reference
/// pairs. Silence pairs are excluded everywhere; an all-silence input is an
/// error. "consonants" covers every non-vowel, non-silence class including
/// phones outside the named subclasses.
inline MetricReport duration_metrics(const std::vector<int>& pred,
                                     const std::vector<int>& ref,
                                     const std::vector<PhoneticClass>& classes) {
  if (pred.size() != ref.size() || pred.size() != classes.size()) {
    throw InvalidArgumentError("duration_metrics: input lengths differ");
  }
  if (pred.empty()) throw InvalidArgumentError("duration_metrics: empty input");

  detail::MetricAccum overall;
  detail::MetricAccum consonants;
  std::map<PhoneticClass, detail::MetricAccum> per_class;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (classes[i] == PhoneticClass::Silence) continue;
    overall.add(pred[i], ref[i]);
    per_class[classes[i]].add(pred[i], ref[i]);
    if (detail::is_consonant(classes[i])) consonants.add(pred[i], ref[i]);
  }
  if (overall.n == 0) {
    throw EmptyEvaluationError("duration_metrics: every pair was silence");
  }

  MetricReport report;
  report.overall = overall.row();
  auto add_row = [&](const std::string& name, const detail::MetricAccum& acc) {
    if (acc.n > 0) report.by_class.emplace_back(name, acc.row());
  };
  add_row("vowels", per_class[PhoneticClass::Vowel]);
  add_row("consonants", consonants);
  add_row("plosives", per_class[PhoneticClass::Plosive]);
  add_row("fricatives", per_class[PhoneticClass::Fricative]);
  add_row("nasals", per_class[PhoneticClass::Nasal]);
  add_row("affricates", per_class[PhoneticClass::Affricate]);
  add_row("glides_liquids", per_class[PhoneticClass::GlideLiquid]);
  add_row("other", per_class[PhoneticClass::Other]);
  return report;
}

// ---------------------------------------------------------------------------
// Duration histogram
// ---------------------------------------------------------------------------

struct Histogram {
  std::vector<std::pair<int, std::size_t>> counts;  // ordered by duration
  int median = 0;
  int min = 0;
  int max = 0;
};

/// Exact unit-width histogram with a sample-median summary (lower of the two
/// middles for even counts).
inline Histogram histogram(const std::vector<int>& durations) {
  if (durations.empty()) throw InvalidArgumentError("histogram: empty input");
  std::map<int, std::size_t> counts;
  for (int d : durations) ++counts[d];
  Histogram h;
  h.min = counts.begin()->first;
  h.max = counts.rbegin()->first;
  for (const auto& [d, c] : counts) h.counts.emplace_back(d, c);
  const std::size_t target = (durations.size() - 1) / 2;  // lower-middle rule
  std::size_t seen = 0;
  for (const auto& [d, c] : counts) {
    seen += c;
    if (seen > target) {
      h.median = d;
      break;
    }
  }
  return h;
}

inline std::string format_histogram_csv(const Histogram& h) {
  std::string out = "duration,count\n";
  for (const auto& [d, c] : h.counts) {
    out += std::to_string(d) + "," + std::to_string(c) + "\n";
  }
  out += "median," + std::to_string(h.median) + "\n";
  out += "min," + std::to_string(h.min) + "\n";
  out += "max," + std::to_string(h.max) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Cross-system comparison with MAE/RMSE trade-off flags
// ---------------------------------------------------------------------------

struct SystemMetrics {
  std::string name;
  MetricRow overall;
};

/// A beats B on MAE while B beats A on RMSE (strict on both sides) -- the
/// signature of a median-like predictor against a mean-like one.
struct TradeoffFlag {
  std::string better_mae;
  std::string better_rmse;
  double mae_better = 0.0, mae_worse = 0.0;
  double rmse_better = 0.0, rmse_worse = 0.0;
};

struct Comparison {
  std::vector<std::string> mae_ranking;   // best (lowest) first
  std::vector<std::string> rmse_ranking;  // best (lowest) first
  std::vector<std::string> corr_ranking;  // best (highest) first
  std::vector<TradeoffFlag> tradeoffs;
};

inline Comparison compare_systems(const std::vector<SystemMetrics>& systems) {
  if (systems.size() < 2) {
    throw InvalidArgumentError("compare_systems needs at least two systems");
  }
  for (const auto& s : systems) {
    if (s.overall.n != systems[0].overall.n) {
      throw InvalidComparisonError("metric tables cover different test sets (n " +
                                   std::to_string(s.overall.n) + " vs " +
                                   std::to_string(systems[0].overall.n) + ")");
    }
  }
  Comparison cmp;
  auto rank_by = [&](auto key, bool ascending) {
    std::vector<std::size_t> idx(systems.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return ascending ? key(systems[a]) < key(systems[b])
                       : key(systems[a]) > key(systems[b]);
    });
    std::vector<std::string> names;
    for (std::size_t i : idx) names.push_back(systems[i].name);
    return names;
  };
  cmp.mae_ranking = rank_by([](const SystemMetrics& s) { return s.overall.mae; }, true);
  cmp.rmse_ranking = rank_by([](const SystemMetrics& s) { return s.overall.rmse; }, true);
  cmp.corr_ranking = rank_by(
      [](const SystemMetrics& s) { return s.overall.corr.value_or(-2.0); }, false);

  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (std::size_t j = i + 1; j < systems.size(); ++j) {
      const auto& a = systems[i];
      const auto& b = systems[j];
      const SystemMetrics* mae_winner = nullptr;
      const SystemMetrics* rmse_winner = nullptr;
      if (a.overall.mae < b.overall.mae && a.overall.rmse > b.overall.rmse) {
        mae_winner = &a;
        rmse_winner = &b;
      } else if (b.overall.mae < a.overall.mae && b.overall.rmse > a.overall.rmse) {
        mae_winner = &b;
        rmse_winner = &a;
      }
      if (mae_winner) {
        TradeoffFlag flag;
        flag.better_mae = mae_winner->name;
        flag.better_rmse = rmse_winner->name;
        flag.mae_better = mae_winner->overall.mae;
        flag.mae_worse = rmse_winner->overall.mae;
        flag.rmse_better = rmse_winner->overall.rmse;
        flag.rmse_worse = mae_winner->overall.rmse;
        cmp.tradeoffs.push_back(std::move(flag));
      }
    }
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Report CSVs
// ---------------------------------------------------------------------------

inline std::string format_corr(const std::optional<double>& corr) {
  return corr.has_value() ? fmt_double(*corr) : "undefined";
}

/// One row per (system, class); the overall row uses class "all".
inline std::string format_metric_report_csv(
    const std::vector<std::pair<std::string, MetricReport>>& reports) {
  std::string out = "system,class,rmse,mae,corr,n\n";
  for (const auto& [system, report] : reports) {
    auto emit = [&](const std::string& cls, const MetricRow& row) {
      out += system + "," + cls + "," + fmt_double(row.rmse) + "," + fmt_double(row.mae) +
             "," + format_corr(row.corr) + "," + std::to_string(row.n) + "\n";
    };
    emit("all", report.overall);
    for (const auto& [cls, row] : report.by_class) emit(cls, row);
  }
  return out;
}

/// Rankings and trade-off flags; row shape documented by the header line.
inline std::string format_comparison_csv(const Comparison& cmp) {
  std::string out = "record,metric,rank_or_mae_winner,system_or_rmse_winner,detail\n";
  auto emit_ranking = [&](const char* metric, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      out += std::string("ranking,") + metric + "," + std::to_string(i + 1) + "," +
             names[i] + ",\n";
    }
  };
  emit_ranking("mae", cmp.mae_ranking);
  emit_ranking("rmse", cmp.rmse_ranking);
  emit_ranking("corr", cmp.corr_ranking);
  for (const auto& f : cmp.tradeoffs) {
    out += "tradeoff,mae_rmse," + f.better_mae + "," + f.better_rmse + "," +
           "mae " + fmt_double(f.mae_better) + "<" + fmt_double(f.mae_worse) +
           " rmse " + fmt_double(f.rmse_worse) + ">" + fmt_double(f.rmse_better) + "\n";
  }
  return out;
}

}  // namespace durhaz
