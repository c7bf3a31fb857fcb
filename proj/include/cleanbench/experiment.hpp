#pragma once
// Bootstrap replication harness: ideal-set extraction, whole-series sampling
// with replacement, strategy x cost-fraction sweeps, and aggregation.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cleanbench/cleaning.hpp"
#include "cleanbench/core.hpp"
#include "cleanbench/distortion.hpp"
#include "cleanbench/glitch.hpp"
#include "cleanbench/rng.hpp"

namespace cleanbench {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  int replications = 50;   // R
  int sample_series = 100; // B, whole series per sampled dataset
  std::vector<Strategy> strategies;
  std::vector<double> cost_fractions{0.0, 20.0, 50.0, 100.0};
  double ideal_threshold = 5.0;  // per-type max glitch percentage for ideal membership
  GlitchWeights weights;
  Transform transform;  // empty per_attr means identity
  std::vector<ConstraintRule> rules;
  std::uint64_t master_seed = 0;
  DistortionOptions distortion;
  // When false, detection and winsorization limits are fitted once from the
  // full ideal set instead of from each replication's ideal sample.
  bool refit_limits_per_replication = true;

  static ExperimentConfig defaults() {
    ExperimentConfig cfg;
    for (int id = 1; id <= 5; ++id) cfg.strategies.push_back(Strategy::by_id(id));
    cfg.rules = reference_rules();
    return cfg;
  }

  void validate() const {
    if (replications < 1) throw Error("replication count must be >= 1");
    if (sample_series < 1) throw Error("sample series count must be >= 1");
    for (double x : cost_fractions) {
      if (x < 0.0 || x > 100.0) throw Error("cost fractions must lie in [0, 100]");
    }
    if (ideal_threshold <= 0.0) throw Error("ideal threshold must be positive");
    weights.validate();
  }

  Transform transform_for(const Dataset& ds) const {
    if (transform.per_attr.empty()) return Transform::identity(ds.width());
    if (transform.per_attr.size() != ds.width())
      throw Error("transform width does not match dataset attributes");
    return transform;
  }
};

struct ReplicationResult {
  int replication = 0;
  int strategy_id = 0;
  double cost_fraction = 0.0;
  double glitch_improvement = 0.0;      // normalized score, dirty minus treated
  double glitch_improvement_raw = 0.0;  // raw weighted cell index delta
  double emd = 0.0;
  std::array<double, kGlitchTypes> dirty_pct{};
  std::array<double, kGlitchTypes> treated_pct{};
};

struct ReplicationFailure {
  int replication = 0;
  int strategy_id = 0;
  double cost_fraction = 0.0;
  std::string message;
};

// ---------------------------------------------------------------------------
// Ideal-set extraction
// ---------------------------------------------------------------------------

namespace detail {

inline OutlierLimits unlimited(std::size_t v) {
  OutlierLimits limits;
  limits.mean.assign(v, 0.0);
  limits.stddev.assign(v, 0.0);
  limits.lo.assign(v, -std::numeric_limits<double>::infinity());
  limits.hi.assign(v, std::numeric_limits<double>::infinity());
  return limits;
}

}  // namespace detail

// Two-pass screen. Pass 1 keeps series whose missing and inconsistent
// percentages are strictly below the threshold; pass 2 fits provisional
// 3-sigma limits on those survivors and additionally screens on the outlier
// percentage. The outlier criterion needs limits from ideal data, which is
// the circularity the two passes resolve.
inline std::vector<std::size_t> ideal_series_indices(const Dataset& ds,
                                                     std::span<const ConstraintRule> rules,
                                                     double threshold,
                                                     const Transform& tf) {
  if (ds.series.empty()) throw Error("empty ideal set");
  const std::size_t v = ds.width();

  CellMask untransformed;
  const Dataset working = apply_transform(ds, tf, &untransformed);
  const GlitchScan pass1 =
      scan_glitches(working, rules, detail::unlimited(v), tf, untransformed);

  std::vector<std::size_t> survivors;
  for (std::size_t si = 0; si < ds.series.size(); ++si) {
    const double cells = static_cast<double>(ds.series[si].length() * v);
    const double missing_pct =
        100.0 * static_cast<double>(pass1.missing.count_in_series(si)) / cells;
    const double inconsistent_pct =
        100.0 * static_cast<double>(pass1.inconsistent.count_in_series(si)) / cells;
    if (missing_pct < threshold && inconsistent_pct < threshold)
      survivors.push_back(si);
  }
  if (survivors.empty()) throw Error("empty ideal set");

  const Dataset survivor_ds = subset_series(working, survivors, Role::Ideal);
  const OutlierLimits limits = fit_outlier_limits(survivor_ds);

  std::vector<std::size_t> ideal;
  for (std::size_t pos = 0; pos < survivors.size(); ++pos) {
    const std::size_t si = survivors[pos];
    const auto& obs_list = working.series[si].observations;
    std::size_t outlier_bits = 0;
    for (const auto& obs : obs_list) {
      const AttrBits bits = detect_outliers(obs, limits);
      for (auto b : bits) outlier_bits += b;
    }
    const double cells = static_cast<double>(obs_list.size() * v);
    if (100.0 * static_cast<double>(outlier_bits) / cells < threshold)
      ideal.push_back(si);
  }
  if (ideal.empty()) throw Error("empty ideal set");
  return ideal;
}

inline Dataset extract_ideal(const Dataset& ds, std::span<const ConstraintRule> rules,
                             double threshold,
                             const Transform& tf) {
  return subset_series(ds, ideal_series_indices(ds, rules, threshold, tf), Role::Ideal);
}

inline Dataset extract_ideal(const Dataset& ds, std::span<const ConstraintRule> rules,
                             double threshold) {
  return extract_ideal(ds, rules, threshold, Transform::identity(ds.width()));
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

// B whole series drawn uniformly with replacement from each source; the dirty
// draws consume the stream first. Duplicated draws receive distinct instance
// ids so node identity stays unique within the sampled dataset.
inline std::pair<Dataset, Dataset> sample_pair(const Dataset& dirty,
                                               const Dataset& ideal, int b,
                                               std::uint64_t seed) {
  if (dirty.series.empty() || ideal.series.empty())
    throw Error("cannot sample from an empty dataset");
  if (b < 1) throw Error("sample size must be >= 1");

  Rng rng(seed);
  const auto draw = [&](const Dataset& source, Role role) {
    Dataset out;
    out.attribute_names = source.attribute_names;
    out.role = role;
    out.series.reserve(static_cast<std::size_t>(b));
    for (int r = 0; r < b; ++r) {
      const std::size_t idx = static_cast<std::size_t>(
          rng.below(static_cast<std::uint64_t>(source.series.size())));
      TimeSeries s = source.series[idx];
      s.node.instance = r;
      out.series.push_back(std::move(s));
    }
    return out;
  };

  Dataset sampled_dirty = draw(dirty, Role::SampledDirty);
  Dataset sampled_ideal = draw(ideal, Role::SampledIdeal);
  return {std::move(sampled_dirty), std::move(sampled_ideal)};
}

// ---------------------------------------------------------------------------
// Replication
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kSampleSalt = 0x7A3B115Dull;
inline constexpr std::uint64_t kImputeSalt = 0x11A9C0DEull;

}  // namespace detail

// One strategy evaluation on the i-th bootstrap pair. The pair, the fitted
// limits, and the imputation stream all derive from the master seed and i, so
// every strategy and fraction of a replication sees the same sampled pair.
inline ReplicationResult run_replication(const Dataset& dirty, const Dataset& ideal,
                                         const ExperimentConfig& cfg,
                                         const Strategy& strategy, double fraction,
                                         int replication) {
  const Transform tf = cfg.transform_for(dirty);
  const std::uint64_t seed_i =
      mix_seed(cfg.master_seed, static_cast<std::uint64_t>(replication) + 1);

  auto [sampled_dirty, sampled_ideal] =
      sample_pair(dirty, ideal, cfg.sample_series, mix_seed(seed_i, detail::kSampleSalt));

  std::optional<OutlierLimits> fixed_limits;
  if (!cfg.refit_limits_per_replication) {
    CellMask skip;
    fixed_limits = fit_outlier_limits(apply_transform(ideal, tf, &skip));
  }

  const StrategyApplication app = run_strategy(
      sampled_dirty, sampled_ideal, strategy, cfg.rules, cfg.weights, tf, fraction,
      mix_seed(seed_i, detail::kImputeSalt), fixed_limits ? &*fixed_limits : nullptr);

  const GlitchScan treated_scan =
      scan_glitches(app.treated, cfg.rules, app.limits, tf, app.treated_untransformed);

  ReplicationResult result;
  result.replication = replication;
  result.strategy_id = strategy.id;
  result.cost_fraction = fraction;
  result.glitch_improvement =
      normalized_glitch_score(app.dirty_working, app.dirty_scan, cfg.weights) -
      normalized_glitch_score(app.treated, treated_scan, cfg.weights);
  result.glitch_improvement_raw = cell_glitch_index(app.dirty_scan, cfg.weights) -
                                  cell_glitch_index(treated_scan, cfg.weights);
  result.emd = statistical_distortion(app.dirty_working, app.treated, cfg.distortion);
  result.dirty_pct = glitch_percentages(app.dirty_working, app.dirty_scan);
  result.treated_pct = glitch_percentages(app.treated, treated_scan);
  return result;
}

struct ExperimentOutput {
  std::vector<ReplicationResult> results;   // ordered by (replication, strategy, fraction)
  std::vector<ReplicationFailure> failures; // same order, failed combinations only
  std::size_t ideal_series = 0;
};

// Full sweep: R x |strategies| x |cost_fractions| evaluations, replications
// running concurrently. Failed combinations are recorded, not dropped
// silently, and the output order never depends on thread scheduling.
inline ExperimentOutput run_experiment(const Dataset& dirty, const ExperimentConfig& cfg) {
  cfg.validate();
  const Transform tf = cfg.transform_for(dirty);
  const Dataset ideal = extract_ideal(dirty, cfg.rules, cfg.ideal_threshold, tf);

  const std::size_t per_rep = cfg.strategies.size() * cfg.cost_fractions.size();
  const std::size_t total = static_cast<std::size_t>(cfg.replications) * per_rep;
  std::vector<std::optional<ReplicationResult>> slots(total);
  std::vector<std::optional<ReplicationFailure>> failed(total);

  const auto run_one = [&](int i) {
    std::size_t slot = static_cast<std::size_t>(i) * per_rep;
    for (const auto& strategy : cfg.strategies) {
      for (double fraction : cfg.cost_fractions) {
        try {
          slots[slot] = run_replication(dirty, ideal, cfg, strategy, fraction, i);
        } catch (const std::exception& e) {
          failed[slot] = ReplicationFailure{i, strategy.id, fraction, e.what()};
        }
        ++slot;
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<unsigned>(hw, static_cast<unsigned>(cfg.replications));
  if (workers <= 1) {
    for (int i = 0; i < cfg.replications; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int i = next.fetch_add(1);
          if (i >= cfg.replications) break;
          run_one(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  ExperimentOutput out;
  out.ideal_series = ideal.series.size();
  out.results.reserve(total);
  for (auto& slot : slots) {
    if (slot) out.results.push_back(std::move(*slot));
  }
  for (auto& f : failed) {
    if (f) out.failures.push_back(std::move(*f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct SummaryRow {
  int strategy_id = 0;
  double cost_fraction = 0.0;
  std::size_t n = 0;
  double improvement_mean = 0.0;
  double improvement_sd = 0.0;
  double emd_mean = 0.0;
  double emd_sd = 0.0;
  std::array<double, kGlitchTypes> dirty_pct_mean{};
  std::array<double, kGlitchTypes> treated_pct_mean{};
};

// Per (strategy, fraction): mean and sample standard deviation of improvement
// and EMD plus mean dirty/treated percentages.
inline std::vector<SummaryRow> summarize(std::span<const ReplicationResult> results) {
  if (results.empty()) throw Error("cannot summarize empty results");

  std::vector<std::pair<int, double>> keys;
  for (const auto& r : results) keys.emplace_back(r.strategy_id, r.cost_fraction);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::vector<SummaryRow> rows;
  rows.reserve(keys.size());
  for (const auto& [sid, fraction] : keys) {
    SummaryRow row;
    row.strategy_id = sid;
    row.cost_fraction = fraction;

    double sum_imp = 0.0, sum_emd = 0.0;
    for (const auto& r : results) {
      if (r.strategy_id != sid || r.cost_fraction != fraction) continue;
      ++row.n;
      sum_imp += r.glitch_improvement;
      sum_emd += r.emd;
      for (std::size_t k = 0; k < kGlitchTypes; ++k) {
        row.dirty_pct_mean[k] += r.dirty_pct[k];
        row.treated_pct_mean[k] += r.treated_pct[k];
      }
    }
    const double n = static_cast<double>(row.n);
    row.improvement_mean = sum_imp / n;
    row.emd_mean = sum_emd / n;
    for (std::size_t k = 0; k < kGlitchTypes; ++k) {
      row.dirty_pct_mean[k] /= n;
      row.treated_pct_mean[k] /= n;
    }

    if (row.n > 1) {
      double ss_imp = 0.0, ss_emd = 0.0;
      for (const auto& r : results) {
        if (r.strategy_id != sid || r.cost_fraction != fraction) continue;
        ss_imp += (r.glitch_improvement - row.improvement_mean) *
                  (r.glitch_improvement - row.improvement_mean);
        ss_emd += (r.emd - row.emd_mean) * (r.emd - row.emd_mean);
      }
      row.improvement_sd = std::sqrt(ss_imp / (n - 1.0));
      row.emd_sd = std::sqrt(ss_emd / (n - 1.0));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cleanbench
