#pragma once
// Glitch detection: missing values, constraint violations, and 3-sigma
// outliers. Produces per-observation bit matrices, dataset-level masks,
// weighted glitch indices, and per-series normalized scores.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cleanbench/core.hpp"

namespace cleanbench {

inline constexpr std::size_t kGlitchTypes = 3;

enum class GlitchType : std::size_t { Missing = 0, Inconsistent = 1, Outlier = 2 };

// ---------------------------------------------------------------------------
// Rules, limits, weights
// ---------------------------------------------------------------------------

// A single consistency constraint. `attr` is the attribute that receives the
// inconsistency bit when the rule is violated.
struct ConstraintRule {
  enum class Kind { LowerBound, Range, ConditionalPopulated };

  Kind kind = Kind::LowerBound;
  std::size_t attr = 0;
  double lower = 0.0;  // LowerBound: bound; Range: low edge
  double upper = 0.0;  // Range: high edge
  std::size_t requires_attr = 0;  // ConditionalPopulated: attribute that must be present

  static ConstraintRule lower_bound(std::size_t attr, double bound) {
    ConstraintRule r;
    r.kind = Kind::LowerBound;
    r.attr = attr;
    r.lower = bound;
    return r;
  }

  static ConstraintRule range(std::size_t attr, double lo, double hi) {
    ConstraintRule r;
    r.kind = Kind::Range;
    r.attr = attr;
    r.lower = lo;
    r.upper = hi;
    return r;
  }

  // Flags `value_attr` when it is populated while `required_attr` is missing.
  static ConstraintRule conditional_populated(std::size_t value_attr,
                                              std::size_t required_attr) {
    ConstraintRule r;
    r.kind = Kind::ConditionalPopulated;
    r.attr = value_attr;
    r.requires_attr = required_attr;
    return r;
  }
};

inline void validate_rules(std::span<const ConstraintRule> rules, std::size_t v) {
  for (const auto& r : rules) {
    if (r.attr >= v) throw Error("rule attribute index out of range");
    if (r.kind == ConstraintRule::Kind::Range && !(r.lower < r.upper))
      throw Error("range rule requires lo < hi");
    if (r.kind == ConstraintRule::Kind::ConditionalPopulated && r.requires_attr >= v)
      throw Error("rule attribute index out of range");
  }
}

// The three case-study constraints of the reference configuration:
// attr1 >= 0, attr3 in [0,1], attr1 must not be populated when attr3 is missing.
inline std::vector<ConstraintRule> reference_rules() {
  return {ConstraintRule::lower_bound(0, 0.0), ConstraintRule::range(2, 0.0, 1.0),
          ConstraintRule::conditional_populated(0, 2)};
}

// Per-attribute 3-sigma acceptance band fitted from an ideal dataset.
struct OutlierLimits {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> lo;  // mean - 3*stddev
  std::vector<double> hi;  // mean + 3*stddev

  std::size_t width() const { return mean.size(); }
};

struct GlitchWeights {
  std::array<double, kGlitchTypes> w{0.25, 0.25, 0.5};

  void validate() const {
    bool any = false;
    for (double x : w) {
      if (x < 0.0) throw Error("glitch weights must be non-negative");
      if (x > 0.0) any = true;
    }
    if (!any) throw Error("at least one glitch weight must be positive");
  }
};

// ---------------------------------------------------------------------------
// Detectors
// ---------------------------------------------------------------------------

using AttrBits = std::vector<std::uint8_t>;

inline AttrBits detect_missing(const Observation& obs) {
  AttrBits bits(obs.values.size(), 0);
  for (std::size_t a = 0; a < obs.values.size(); ++a)
    bits[a] = obs.values[a] ? 0 : 1;
  return bits;
}

namespace detail {

inline bool rule_violated(const ConstraintRule& r,
                          std::span<const std::optional<double>> values) {
  const auto& flagged = values[r.attr];
  switch (r.kind) {
    case ConstraintRule::Kind::LowerBound:
      return flagged && *flagged < r.lower;
    case ConstraintRule::Kind::Range:
      return flagged && (*flagged < r.lower || *flagged > r.upper);
    case ConstraintRule::Kind::ConditionalPopulated:
      return flagged && !values[r.requires_attr];
  }
  return false;
}

}  // namespace detail

// Bound and range rules skip missing operands; the conditional rule fires only
// when the flagged attribute is observed and its required attribute is not.
inline AttrBits detect_inconsistent(const Observation& obs,
                                    std::span<const ConstraintRule> rules) {
  AttrBits bits(obs.values.size(), 0);
  for (const auto& r : rules) {
    if (detail::rule_violated(r, obs.values)) bits[r.attr] = 1;
  }
  return bits;
}

// Pooled per-attribute sample mean and standard deviation (n-1 denominator)
// over observed values across all series.
inline OutlierLimits fit_outlier_limits(const Dataset& ideal) {
  const std::size_t v = ideal.width();
  std::vector<std::size_t> n(v, 0);
  std::vector<double> mean(v, 0.0), m2(v, 0.0);

  for (const auto& s : ideal.series) {
    for (const auto& obs : s.observations) {
      for (std::size_t a = 0; a < v; ++a) {
        if (!obs.values[a]) continue;
        const double x = *obs.values[a];
        ++n[a];
        const double d = x - mean[a];
        mean[a] += d / static_cast<double>(n[a]);
        m2[a] += d * (x - mean[a]);
      }
    }
  }

  OutlierLimits limits;
  limits.mean.resize(v);
  limits.stddev.resize(v);
  limits.lo.resize(v);
  limits.hi.resize(v);
  for (std::size_t a = 0; a < v; ++a) {
    if (n[a] < 2) {
      throw Error("attribute '" + ideal.attribute_names[a] +
                  "' has fewer than 2 observed values; cannot fit limits");
    }
    limits.mean[a] = mean[a];
    limits.stddev[a] = std::sqrt(m2[a] / static_cast<double>(n[a] - 1));
    limits.lo[a] = mean[a] - 3.0 * limits.stddev[a];
    limits.hi[a] = mean[a] + 3.0 * limits.stddev[a];
  }
  return limits;
}

// Closed acceptance interval: values equal to a limit are acceptable, so a
// winsorized value is never re-flagged. Missing values are never outliers.
inline AttrBits detect_outliers(const Observation& obs, const OutlierLimits& limits) {
  AttrBits bits(obs.values.size(), 0);
  for (std::size_t a = 0; a < obs.values.size(); ++a) {
    if (!obs.values[a]) continue;
    const double x = *obs.values[a];
    bits[a] = (x < limits.lo[a] || x > limits.hi[a]) ? 1 : 0;
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Glitch matrices and dataset scans
// ---------------------------------------------------------------------------

// v x 3 bit matrix for one observation, column order [missing, inconsistent,
// outlier].
struct GlitchMatrix {
  std::vector<std::array<std::uint8_t, kGlitchTypes>> rows;

  std::size_t width() const { return rows.size(); }

  bool any() const {
    for (const auto& r : rows)
      if (r[0] | r[1] | r[2]) return true;
    return false;
  }
};

inline GlitchMatrix build_glitch_matrix(const Observation& obs,
                                        std::span<const ConstraintRule> rules,
                                        const OutlierLimits& limits) {
  const AttrBits m = detect_missing(obs);
  const AttrBits i = detect_inconsistent(obs, rules);
  const AttrBits o = detect_outliers(obs, limits);
  GlitchMatrix g;
  g.rows.resize(obs.values.size());
  for (std::size_t a = 0; a < obs.values.size(); ++a)
    g.rows[a] = {m[a], i[a], o[a]};
  return g;
}

inline double weighted_score(const GlitchMatrix& g, const GlitchWeights& weights) {
  double total = 0.0;
  for (const auto& row : g.rows)
    for (std::size_t k = 0; k < kGlitchTypes; ++k)
      if (row[k]) total += weights.w[k];
  return total;
}

// Whole-dataset detection result: one mask per glitch type.
struct GlitchScan {
  CellMask missing;
  CellMask inconsistent;
  CellMask outlier;
};

namespace detail {

template <class RuleValues>
GlitchScan scan_glitches_impl(const Dataset& ds, std::span<const ConstraintRule> rules,
                              const OutlierLimits& limits, RuleValues&& rule_values) {
  validate_rules(rules, ds.width());
  GlitchScan scan{CellMask(ds), CellMask(ds), CellMask(ds)};
  const std::size_t v = ds.width();

  for (std::size_t si = 0; si < ds.series.size(); ++si) {
    const auto& obs_list = ds.series[si].observations;
    for (std::size_t o = 0; o < obs_list.size(); ++o) {
      const Observation& obs = obs_list[o];
      for (std::size_t a = 0; a < v; ++a) {
        if (!obs.values[a]) {
          scan.missing.set(si, o, a);
          continue;
        }
        const double x = *obs.values[a];
        if (x < limits.lo[a] || x > limits.hi[a]) scan.outlier.set(si, o, a);
      }
      const auto& rv = rule_values(si, o, obs);
      for (const auto& r : rules) {
        if (rule_violated(r, rv)) scan.inconsistent.set(si, o, r.attr);
      }
    }
  }
  return scan;
}

}  // namespace detail

inline GlitchScan scan_glitches(const Dataset& ds,
                                std::span<const ConstraintRule> rules,
                                const OutlierLimits& limits) {
  return detail::scan_glitches_impl(
      ds, rules, limits,
      [](std::size_t, std::size_t, const Observation& obs)
          -> const std::vector<std::optional<double>>& { return obs.values; });
}

// Transform-aware scan. Outlier detection runs on the stored (working-space)
// values; rules are evaluated against a raw-space view in which
// log-transformed cells are exponentiated back and `untransformed` cells are
// taken as stored.
inline GlitchScan scan_glitches(const Dataset& ds,
                                std::span<const ConstraintRule> rules,
                                const OutlierLimits& limits, const Transform& tf,
                                const CellMask& untransformed) {
  if (!tf.has_log()) return scan_glitches(ds, rules, limits);

  std::vector<std::optional<double>> raw(ds.width());
  return detail::scan_glitches_impl(
      ds, rules, limits,
      [&](std::size_t si, std::size_t o, const Observation& obs)
          -> const std::vector<std::optional<double>>& {
        for (std::size_t a = 0; a < obs.values.size(); ++a) {
          raw[a] = obs.values[a];
          if (raw[a] && tf.per_attr[a] == AttrTransform::NaturalLog &&
              !untransformed.test(si, o, a)) {
            raw[a] = std::exp(*raw[a]);
          }
        }
        return raw;
      });
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

// Raw glitch index: weighted count of set bits over all cells.
inline double cell_glitch_index(const GlitchScan& scan, const GlitchWeights& weights) {
  return static_cast<double>(scan.missing.count()) * weights.w[0] +
         static_cast<double>(scan.inconsistent.count()) * weights.w[1] +
         static_cast<double>(scan.outlier.count()) * weights.w[2];
}

inline double cell_glitch_index(const Dataset& ds,
                                std::span<const ConstraintRule> rules,
                                const OutlierLimits& limits,
                                const GlitchWeights& weights) {
  return cell_glitch_index(scan_glitches(ds, rules, limits), weights);
}

// Per-series glitch-bit totals divided by that series' length; the weighted
// sum of those per-type rates, accumulated over series.
inline double normalized_glitch_score(const Dataset& ds, const GlitchScan& scan,
                                      const GlitchWeights& weights) {
  double total = 0.0;
  for (std::size_t si = 0; si < ds.series.size(); ++si) {
    const double len = static_cast<double>(ds.series[si].length());
    if (len == 0.0) throw Error("normalized glitch score requires nonempty series");
    const double per_series =
        static_cast<double>(scan.missing.count_in_series(si)) * weights.w[0] +
        static_cast<double>(scan.inconsistent.count_in_series(si)) * weights.w[1] +
        static_cast<double>(scan.outlier.count_in_series(si)) * weights.w[2];
    total += per_series / len;
  }
  return total;
}

inline double normalized_glitch_score(const Dataset& ds,
                                      std::span<const ConstraintRule> rules,
                                      const OutlierLimits& limits,
                                      const GlitchWeights& weights) {
  return normalized_glitch_score(ds, scan_glitches(ds, rules, limits), weights);
}

struct SeriesScore {
  std::size_t series = 0;  // index into Dataset::series
  NodeId node;
  double score = 0.0;
};

// Per-series normalized scores sorted descending; ties broken by ascending
// NodeId so the order is deterministic.
inline std::vector<SeriesScore> series_glitch_rank(const Dataset& ds,
                                                   const GlitchScan& scan,
                                                   const GlitchWeights& weights) {
  std::vector<SeriesScore> out;
  out.reserve(ds.series.size());
  for (std::size_t si = 0; si < ds.series.size(); ++si) {
    const double len = static_cast<double>(ds.series[si].length());
    const double score =
        (static_cast<double>(scan.missing.count_in_series(si)) * weights.w[0] +
         static_cast<double>(scan.inconsistent.count_in_series(si)) * weights.w[1] +
         static_cast<double>(scan.outlier.count_in_series(si)) * weights.w[2]) /
        len;
    out.push_back({si, ds.series[si].node, score});
  }
  std::sort(out.begin(), out.end(), [](const SeriesScore& a, const SeriesScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  return out;
}

inline std::vector<SeriesScore> series_glitch_rank(const Dataset& ds,
                                                   std::span<const ConstraintRule> rules,
                                                   const OutlierLimits& limits,
                                                   const GlitchWeights& weights) {
  return series_glitch_rank(ds, scan_glitches(ds, rules, limits), weights);
}

// 100 * (cells with the bit set) / (total cells), per glitch type.
inline std::array<double, kGlitchTypes> glitch_percentages(const Dataset& ds,
                                                           const GlitchScan& scan) {
  const double total = static_cast<double>(ds.cell_count());
  if (total == 0.0) return {0.0, 0.0, 0.0};
  return {100.0 * static_cast<double>(scan.missing.count()) / total,
          100.0 * static_cast<double>(scan.inconsistent.count()) / total,
          100.0 * static_cast<double>(scan.outlier.count()) / total};
}

inline std::array<double, kGlitchTypes> glitch_percentages(
    const Dataset& ds, std::span<const ConstraintRule> rules,
    const OutlierLimits& limits) {
  return glitch_percentages(ds, scan_glitches(ds, rules, limits));
}

}  // namespace cleanbench
