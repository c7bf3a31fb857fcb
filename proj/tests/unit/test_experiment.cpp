#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "cleanbench/experiment.hpp"
#include "cleanbench/synth.hpp"
#include "common/test_helpers.hpp"

using namespace cleanbench;
using cbtest::kMissing;
using cbtest::make_dataset;

namespace {

// One-attribute series with an exact number of missing and negative cells.
TimeSeries graded_series(int k, int len, int n_missing, int n_negative,
                         int n_extreme = 0) {
  TimeSeries s;
  s.node = {0, 0, k, 0};
  for (int t = 0; t < len; ++t) {
    Observation obs;
    obs.t = t;
    double value = 1.0 + 0.01 * t;
    if (t < n_missing) {
      obs.values.push_back(std::nullopt);
      s.observations.push_back(std::move(obs));
      continue;
    }
    if (t < n_missing + n_negative) value = -1.0;
    if (t >= n_missing + n_negative && t < n_missing + n_negative + n_extreme)
      value = 1000.0;
    obs.values.push_back(value);
    s.observations.push_back(std::move(obs));
  }
  return s;
}

const std::vector<ConstraintRule> one_attr_rules{ConstraintRule::lower_bound(0, 0.0)};

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.replications = 2;
  cfg.sample_series = 12;
  cfg.strategies = {Strategy::by_id(5)};
  cfg.cost_fractions = {0.0, 100.0};
  cfg.rules = reference_rules();
  cfg.master_seed = 77;
  return cfg;
}

SynthSpec small_synth() {
  SynthSpec spec;
  spec.layers_i = 1;
  spec.layers_j = 4;
  spec.layers_k = 6;  // 24 series
  spec.length = 60;
  spec.clean_series_fraction = 0.5;
  spec.seed = 909;
  return spec;
}

}  // namespace

TEST_CASE("extract_ideal screens per-series percentages strictly below threshold") {
  // len 50, v=1: 2 cells = 4%, 3 cells = 6%.
  SECTION("a series at 4% of each type is included") {
    const Dataset ds = make_dataset(
        {graded_series(0, 50, 2, 2, 2), graded_series(1, 50, 0, 0, 0),
         graded_series(2, 50, 0, 0, 0), graded_series(3, 50, 0, 0, 0)},
        1);
    const Dataset ideal = extract_ideal(ds, one_attr_rules, 5.0);
    std::set<int> kept;
    for (const auto& s : ideal.series) kept.insert(s.node.k);
    CHECK(kept.contains(0));
  }

  SECTION("a series at 6% missing is excluded") {
    const Dataset ds = make_dataset(
        {graded_series(0, 50, 3, 0, 0), graded_series(1, 50, 0, 0, 0),
         graded_series(2, 50, 0, 0, 0)},
        1);
    const Dataset ideal = extract_ideal(ds, one_attr_rules, 5.0);
    for (const auto& s : ideal.series) CHECK(s.node.k != 0);
  }

  SECTION("a fully clean dataset is its own ideal set") {
    const Dataset ds = make_dataset(
        {graded_series(0, 50, 0, 0, 0), graded_series(1, 50, 0, 0, 0)}, 1);
    const Dataset ideal = extract_ideal(ds, one_attr_rules, 5.0);
    CHECK(ideal.series.size() == 2);
    CHECK(ideal.role == Role::Ideal);
  }

  SECTION("outlier screening uses limits fitted on pass-1 survivors") {
    // Series 0 is >5% extreme relative to the survivors' scale.
    const Dataset ds = make_dataset(
        {graded_series(0, 50, 0, 0, 4), graded_series(1, 50, 0, 0, 0),
         graded_series(2, 50, 0, 0, 0), graded_series(3, 50, 0, 0, 0)},
        1);
    const Dataset ideal = extract_ideal(ds, one_attr_rules, 5.0);
    for (const auto& s : ideal.series) CHECK(s.node.k != 0);
  }

  SECTION("no qualifying series is an error") {
    const Dataset ds = make_dataset({graded_series(0, 50, 10, 0, 0)}, 1);
    CHECK_THROWS_WITH(extract_ideal(ds, one_attr_rules, 5.0),
                      Catch::Matchers::ContainsSubstring("empty ideal set"));
  }
}

TEST_CASE("sample_pair draws whole series with replacement") {
  const Dataset dirty = make_dataset(
      {graded_series(0, 10, 0, 0, 0), graded_series(1, 10, 1, 0, 0)}, 1);
  const Dataset ideal = make_dataset({graded_series(5, 10, 0, 0, 0)}, 1);

  SECTION("single-series sources reproduce those series") {
    const Dataset one = make_dataset({graded_series(3, 10, 0, 0, 0)}, 1);
    auto [d, i] = sample_pair(one, ideal, 1, 42);
    REQUIRE(d.series.size() == 1);
    REQUIRE(i.series.size() == 1);
    CHECK(d.series[0].node.k == 3);
    CHECK(i.series[0].node.k == 5);
    CHECK(d.role == Role::SampledDirty);
    CHECK(i.role == Role::SampledIdeal);
  }

  SECTION("the same seed yields an identical pair") {
    auto [d1, i1] = sample_pair(dirty, ideal, 7, 1234);
    auto [d2, i2] = sample_pair(dirty, ideal, 7, 1234);
    CHECK(d1 == d2);
    CHECK(i1 == i2);
  }

  SECTION("B draws come from the source series, intact") {
    auto [d, i] = sample_pair(dirty, ideal, 100, 5);
    REQUIRE(d.series.size() == 100);
    REQUIRE(i.series.size() == 100);
    std::set<int> instances;
    for (const auto& s : d.series) {
      CHECK((s.node.k == 0 || s.node.k == 1));
      CHECK(s.length() == 10);
      instances.insert(s.node.instance);
    }
    CHECK(instances.size() == 100);  // duplicates get distinct instance ids
  }
}

TEST_CASE("run_replication") {
  const Dataset dirty = generate(small_synth());
  const ExperimentConfig cfg = small_config();
  const Dataset ideal = extract_ideal(dirty, cfg.rules, cfg.ideal_threshold);

  SECTION("x = 0 reports zero improvement and zero distortion") {
    const ReplicationResult r =
        run_replication(dirty, ideal, cfg, Strategy::by_id(5), 0.0, 0);
    CHECK(r.glitch_improvement == 0.0);
    CHECK(r.glitch_improvement_raw == 0.0);
    CHECK(r.emd == 0.0);
    CHECK(r.dirty_pct == r.treated_pct);
  }

  SECTION("repeated runs are bit-identical") {
    const ReplicationResult a =
        run_replication(dirty, ideal, cfg, Strategy::by_id(1), 100.0, 3);
    const ReplicationResult b =
        run_replication(dirty, ideal, cfg, Strategy::by_id(1), 100.0, 3);
    CHECK(a.glitch_improvement == b.glitch_improvement);
    CHECK(a.emd == b.emd);
    CHECK(a.treated_pct == b.treated_pct);
  }

  SECTION("strategies share the replication's sampled pair") {
    const ReplicationResult a =
        run_replication(dirty, ideal, cfg, Strategy::by_id(3), 100.0, 1);
    const ReplicationResult b =
        run_replication(dirty, ideal, cfg, Strategy::by_id(4), 100.0, 1);
    CHECK(a.dirty_pct == b.dirty_pct);  // same pair, same detection
  }
}

TEST_CASE("run_experiment sweeps strategies and fractions") {
  const Dataset dirty = generate(small_synth());

  SECTION("result count and ordering") {
    ExperimentConfig cfg = small_config();
    cfg.replications = 2;
    cfg.strategies = {Strategy::by_id(4), Strategy::by_id(5)};
    cfg.cost_fractions = {0.0, 100.0};
    const ExperimentOutput out = run_experiment(dirty, cfg);
    REQUIRE(out.failures.empty());
    REQUIRE(out.results.size() == 2 * 2 * 2);

    std::size_t idx = 0;
    for (int i = 0; i < 2; ++i) {
      for (int sid : {4, 5}) {
        for (double x : {0.0, 100.0}) {
          CHECK(out.results[idx].replication == i);
          CHECK(out.results[idx].strategy_id == sid);
          CHECK(out.results[idx].cost_fraction == x);
          ++idx;
        }
      }
    }
  }

  SECTION("an empty strategy list yields no results") {
    ExperimentConfig cfg = small_config();
    cfg.strategies.clear();
    const ExperimentOutput out = run_experiment(dirty, cfg);
    CHECK(out.results.empty());
    CHECK(out.failures.empty());
  }

  SECTION("every x = 0 row is exactly zero") {
    ExperimentConfig cfg = small_config();
    cfg.replications = 3;
    cfg.strategies = {Strategy::by_id(1), Strategy::by_id(5)};
    const ExperimentOutput out = run_experiment(dirty, cfg);
    for (const auto& r : out.results) {
      if (r.cost_fraction == 0.0) {
        CHECK(r.glitch_improvement == 0.0);
        CHECK(r.emd == 0.0);
      }
    }
  }

  SECTION("pairing: every strategy sees the same pair within a replication") {
    ExperimentConfig cfg = small_config();
    cfg.replications = 2;
    cfg.strategies = {Strategy::by_id(2), Strategy::by_id(3), Strategy::by_id(4)};
    cfg.cost_fractions = {100.0};
    const ExperimentOutput out = run_experiment(dirty, cfg);
    REQUIRE(out.results.size() == 6);
    for (int i = 0; i < 2; ++i) {
      const auto& base = out.results[static_cast<std::size_t>(i) * 3];
      for (int s = 1; s < 3; ++s) {
        CHECK(out.results[static_cast<std::size_t>(i) * 3 + s].dirty_pct ==
              base.dirty_pct);
      }
    }
  }

  SECTION("whole experiment is reproducible") {
    ExperimentConfig cfg = small_config();
    const ExperimentOutput a = run_experiment(dirty, cfg);
    const ExperimentOutput b = run_experiment(dirty, cfg);
    REQUIRE(a.results.size() == b.results.size());
    for (std::size_t r = 0; r < a.results.size(); ++r) {
      CHECK(a.results[r].glitch_improvement == b.results[r].glitch_improvement);
      CHECK(a.results[r].emd == b.results[r].emd);
    }
  }
}

TEST_CASE("summarize aggregates by strategy and fraction") {
  SECTION("a single result is its own mean with zero deviation") {
    ReplicationResult r;
    r.strategy_id = 2;
    r.cost_fraction = 100.0;
    r.glitch_improvement = 0.5;
    r.emd = 0.125;
    const auto rows = summarize(std::vector{r});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].n == 1);
    CHECK(rows[0].improvement_mean == 0.5);
    CHECK(rows[0].improvement_sd == 0.0);
    CHECK(rows[0].emd_mean == 0.125);
    CHECK(rows[0].emd_sd == 0.0);
  }

  SECTION("identical results have zero deviation") {
    ReplicationResult r;
    r.strategy_id = 1;
    r.cost_fraction = 50.0;
    r.glitch_improvement = 0.25;
    r.emd = 0.0625;
    const auto rows = summarize(std::vector{r, r, r});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].n == 3);
    CHECK(rows[0].improvement_mean == 0.25);
    CHECK(rows[0].improvement_sd == 0.0);
  }

  SECTION("x = 0 rows aggregate to zero") {
    ReplicationResult r;
    r.strategy_id = 1;
    r.cost_fraction = 0.0;
    const auto rows = summarize(std::vector{r, r});
    CHECK(rows[0].improvement_mean == 0.0);
    CHECK(rows[0].emd_mean == 0.0);
  }

  SECTION("groups split by strategy and fraction") {
    ReplicationResult a, b;
    a.strategy_id = 1;
    a.cost_fraction = 0.0;
    b.strategy_id = 1;
    b.cost_fraction = 100.0;
    b.glitch_improvement = 1.0;
    const auto rows = summarize(std::vector{a, b});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cost_fraction == 0.0);
    CHECK(rows[1].cost_fraction == 100.0);
  }

  SECTION("empty input is an error") {
    CHECK_THROWS(summarize(std::vector<ReplicationResult>{}));
  }
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = small_config();
  cfg.replications = 0;
  CHECK_THROWS(cfg.validate());

  cfg = small_config();
  cfg.cost_fractions = {101.0};
  CHECK_THROWS(cfg.validate());

  cfg = small_config();
  cfg.weights.w = {0.0, 0.0, 0.0};
  CHECK_THROWS(cfg.validate());

  CHECK_NOTHROW(small_config().validate());
}
