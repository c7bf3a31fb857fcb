#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cleanbench/distortion.hpp"
#include "cleanbench/rng.hpp"
#include "common/random_histograms.hpp"
#include "common/test_helpers.hpp"
#include "common/transport_oracle.hpp"

using namespace cleanbench;
using cbtest::kMissing;
using cbtest::make_dataset;
using cbtest::make_series;

namespace {

TupleList points_1d(std::initializer_list<double> xs) {
  TupleList pts;
  pts.dims = 1;
  pts.data.assign(xs);
  return pts;
}

BinningSpec spec_1d(int bins, double lo, double hi) {
  BinningSpec spec;
  spec.bins = {bins};
  spec.lo = {lo};
  spec.hi = {hi};
  return spec;
}

double check_marginals(const FlowSolution& sol, const Histogram& P, const Histogram& Q) {
  std::vector<double> row(P.bins.size(), 0.0), col(Q.bins.size(), 0.0);
  for (const auto& arc : sol.flows) {
    REQUIRE(arc.amount >= 0.0);
    row[arc.from] += arc.amount;
    col[arc.to] += arc.amount;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i)
    worst = std::max(worst, std::abs(row[i] - P.bins[i].mass));
  for (std::size_t j = 0; j < col.size(); ++j)
    worst = std::max(worst, std::abs(col[j] - Q.bins[j].mass));
  return worst;
}

}  // namespace

TEST_CASE("build_histogram bins points and normalizes masses") {
  SECTION("identical points collapse to one bin") {
    const Histogram h = build_histogram(points_1d({0.3, 0.3, 0.3, 0.3}), spec_1d(4, 0, 1));
    REQUIRE(h.bins.size() == 1);
    CHECK(h.bins[0].mass == 1.0);
  }
  SECTION("two points split evenly over two bins") {
    const Histogram h = build_histogram(points_1d({0.1, 0.9}), spec_1d(2, 0, 1));
    REQUIRE(h.bins.size() == 2);
    CHECK(h.bins[0].mass == 0.5);
    CHECK(h.bins[1].mass == 0.5);
  }
  SECTION("a point at the max edge lands in the last (closed) bin") {
    const Histogram h = build_histogram(points_1d({1.0}), spec_1d(4, 0, 1));
    REQUIRE(h.bins.size() == 1);
    CHECK(h.bins[0].flat == 3);
  }
  SECTION("empty input is an error") {
    CHECK_THROWS_WITH(build_histogram(TupleList{1, {}}, spec_1d(4, 0, 1)),
                      Catch::Matchers::ContainsSubstring("no complete observations"));
  }
  SECTION("masses sum to one") {
    Rng rng(5);
    TupleList pts;
    pts.dims = 1;
    for (int p = 0; p < 1000; ++p) pts.data.push_back(rng.uniform());
    const Histogram h = build_histogram(pts, spec_1d(8, 0, 1));
    double total = 0.0;
    for (const auto& bin : h.bins) total += bin.mass;
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("ground_distance rescales each dimension by its support range") {
  SECTION("identical centers") {
    const auto spec = spec_1d(8, 0, 1);
    const std::vector<double> a{0.5};
    CHECK(ground_distance(a, a, spec) == 0.0);
  }
  SECTION("adjacent of 8 bins over [0,1] is 1/8") {
    const auto spec = spec_1d(8, 0, 1);
    const std::vector<double> a{spec.center(0, 2)}, b{spec.center(0, 3)};
    CHECK(ground_distance(a, b, spec) == Catch::Approx(0.125));
  }
  SECTION("normalized 3-4-5 triangle") {
    BinningSpec spec;
    spec.bins = {4, 4};
    spec.lo = {0.0, 0.0};
    spec.hi = {1.0, 1.0};
    const std::vector<double> a{0.1, 0.2}, b{0.4, 0.6};
    CHECK(ground_distance(a, b, spec) == Catch::Approx(0.5));
  }
  SECTION("a degenerate dimension contributes nothing") {
    BinningSpec spec;
    spec.bins = {4, 4};
    spec.lo = {0.0, 2.0};
    spec.hi = {1.0, 2.0};
    const std::vector<double> a{0.25, 2.0}, b{0.5, 2.0};
    CHECK(ground_distance(a, b, spec) == Catch::Approx(0.25));
  }
}

TEST_CASE("emd worked examples") {
  const auto spec = spec_1d(8, 0, 1);
  const double spacing = 1.0 / 8.0;

  SECTION("identical histograms cost zero exactly") {
    const Histogram h = build_histogram(points_1d({0.1, 0.4, 0.9}), spec);
    CHECK(emd(h, h) == 0.0);
  }
  SECTION("point masses three bins apart") {
    const Histogram p = histogram_from_masses(spec, std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0});
    const Histogram q = histogram_from_masses(spec, std::vector<double>{0, 0, 0, 1, 0, 0, 0, 0});
    CHECK(emd(p, q) == Catch::Approx(3.0 * spacing).epsilon(1e-12));
  }
  SECTION("staircase shift moves one unit of CDF") {
    const auto spec3 = spec_1d(3, 0, 1);
    const Histogram p = histogram_from_masses(spec3, std::vector<double>{0.5, 0.5, 0.0});
    const Histogram q = histogram_from_masses(spec3, std::vector<double>{0.0, 0.5, 0.5});
    CHECK(emd(p, q) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(emd_1d_oracle(p, q) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SECTION("mismatched specs are an error") {
    const Histogram p = build_histogram(points_1d({0.5}), spec);
    const Histogram q = build_histogram(points_1d({0.5}), spec_1d(4, 0, 1));
    CHECK_THROWS(emd(p, q));
  }
}

TEST_CASE("emd_1d_oracle worked examples") {
  const auto spec = spec_1d(2, 0, 1);
  SECTION("identical histograms") {
    const Histogram p = histogram_from_masses(spec, std::vector<double>{0.25, 0.75});
    CHECK(emd_1d_oracle(p, p) == 0.0);
  }
  SECTION("swapped masses cost half a spacing unit") {
    const Histogram p = histogram_from_masses(spec, std::vector<double>{0.25, 0.75});
    const Histogram q = histogram_from_masses(spec, std::vector<double>{0.75, 0.25});
    CHECK(emd_1d_oracle(p, q) == Catch::Approx(0.5 * 0.5).epsilon(1e-12));
  }
  SECTION("rejects non-1-D input") {
    BinningSpec spec2;
    spec2.bins = {2, 2};
    spec2.lo = {0, 0};
    spec2.hi = {1, 1};
    TupleList pts;
    pts.dims = 2;
    pts.data = {0.1, 0.1};
    const Histogram p = build_histogram(pts, spec2);
    CHECK_THROWS(emd_1d_oracle(p, p));
  }
}

TEST_CASE("solver matches the 1-D CDF oracle on random pairs") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const BinningSpec spec = cbtest::random_1d_spec(rng);
    const std::int64_t total = 10 + static_cast<std::int64_t>(rng.below(200));
    const Histogram p = cbtest::random_1d_histogram(rng, spec, total);
    const Histogram q = cbtest::random_1d_histogram(rng, spec, total);
    const double solver = emd(p, q);
    const double oracle = emd_1d_oracle(p, q);
    REQUIRE_THAT(solver, Catch::Matchers::WithinAbs(oracle, 1e-9));
  }
}

TEST_CASE("solver matches brute-force enumeration on small instances") {
  Rng rng(7777);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = cbtest::random_small_instance(rng);
    std::vector<double> cost(inst.P.bins.size() * inst.Q.bins.size());
    for (std::size_t i = 0; i < inst.P.bins.size(); ++i) {
      for (std::size_t j = 0; j < inst.Q.bins.size(); ++j) {
        cost[i * inst.Q.bins.size() + j] =
            ground_distance(inst.P.bins[i].center, inst.Q.bins[j].center, inst.P.spec);
      }
    }
    cbtest::TransportBruteForce oracle(inst.supply, inst.demand, cost);
    const double expected = oracle.solve() / static_cast<double>(inst.total);
    const double actual = emd(inst.P, inst.Q);
    REQUIRE_THAT(actual, Catch::Matchers::WithinAbs(expected, 1e-9));
  }
}

TEST_CASE("flow solutions are feasible transportation plans") {
  Rng rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = cbtest::random_small_instance(rng, 12);
    const FlowSolution sol = solve_transport(inst.P, inst.Q);
    CHECK(check_marginals(sol, inst.P, inst.Q) <= 1e-9);
  }
}

TEST_CASE("emd is a metric on a shared spec") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const BinningSpec spec = cbtest::random_1d_spec(rng, 2, 16);
    const std::int64_t total = 20 + static_cast<std::int64_t>(rng.below(100));
    const Histogram p = cbtest::random_1d_histogram(rng, spec, total);
    const Histogram q = cbtest::random_1d_histogram(rng, spec, total);
    const Histogram r = cbtest::random_1d_histogram(rng, spec, total);

    CHECK(emd(p, p) == 0.0);
    CHECK(std::abs(emd(p, q) - emd(q, p)) <= 1e-9);
    CHECK(emd(p, r) <= emd(p, q) + emd(q, r) + 1e-9);
  }
}

TEST_CASE("statistical_distortion") {
  SECTION("identical datasets have zero distortion") {
    const Dataset ds = make_dataset(
        {make_series({0, 0, 0}, {{1.0, 5.0}, {2.0, 6.0}, {3.0, 7.0}})}, 2);
    CHECK(statistical_distortion(ds, ds) == 0.0);
  }

  SECTION("translation moves EMD by about the shift") {
    Rng rng(4242);
    Dataset dirty = make_dataset({}, 1);
    TimeSeries s;
    s.node = {0, 0, 0, 0};
    for (int t = 0; t < 4000; ++t) {
      Observation obs;
      obs.t = t;
      obs.values = {rng.normal(0.0, 1.0)};
      s.observations.push_back(std::move(obs));
    }
    dirty.series.push_back(s);

    // Shift every value by two bin widths of the union support.
    double lo = 1e300, hi = -1e300;
    for (const auto& obs : dirty.series[0].observations) {
      lo = std::min(lo, *obs.values[0]);
      hi = std::max(hi, *obs.values[0]);
    }
    const int bins = 8;
    const double shift = 2.0 * (hi - lo) / bins;
    Dataset treated = dirty;
    for (auto& obs : treated.series[0].observations) obs.values[0] = *obs.values[0] + shift;

    const double normalized_shift = shift / ((hi + shift) - lo);
    const double bin_width_norm = 1.0 / bins;
    const double d = statistical_distortion(dirty, treated, {bins, DistortionMode::Joint});
    CHECK(d == Catch::Approx(normalized_shift).margin(bin_width_norm));
  }

  SECTION("winsorizing a heavy tail yields strictly positive distortion") {
    Dataset dirty = make_dataset({}, 1);
    TimeSeries s;
    s.node = {0, 0, 0, 0};
    for (int t = 0; t < 100; ++t) {
      Observation obs;
      obs.t = t;
      obs.values = {t < 95 ? 1.0 + 0.01 * t : 1000.0};  // heavy tail
      s.observations.push_back(std::move(obs));
    }
    dirty.series.push_back(s);

    Dataset treated = dirty;
    for (auto& obs : treated.series[0].observations) {
      if (*obs.values[0] > 10.0) obs.values[0] = 10.0;
    }
    CHECK(statistical_distortion(dirty, treated) > 0.0);
  }

  SECTION("duplicating every point in both datasets changes nothing") {
    const Dataset dirty = make_dataset(
        {make_series({0, 0, 0}, {{1.0}, {2.0}, {5.0}, {9.0}})}, 1);
    const Dataset treated = make_dataset(
        {make_series({0, 0, 0}, {{1.5}, {2.5}, {5.5}, {8.0}})}, 1);

    const auto duplicate = [](const Dataset& ds) {
      Dataset out = ds;
      TimeSeries copy = ds.series[0];
      copy.node.k += 1;
      out.series.push_back(copy);
      return out;
    };
    CHECK(statistical_distortion(duplicate(dirty), duplicate(treated)) ==
          Catch::Approx(statistical_distortion(dirty, treated)).margin(1e-12));
  }

  SECTION("an all-missing pool is an error") {
    const Dataset dirty = make_dataset({make_series({0, 0, 0}, {{1.0, 1.0}})}, 2);
    const Dataset empty = make_dataset(
        {make_series({0, 0, 0}, {{kMissing, 1.0}, {1.0, kMissing}})}, 2);
    CHECK_THROWS_WITH(statistical_distortion(dirty, empty),
                      Catch::Matchers::ContainsSubstring("no complete observations"));
  }

  SECTION("per-attribute-sum mode sums marginal distances") {
    const Dataset dirty = make_dataset(
        {make_series({0, 0, 0}, {{1.0, 5.0}, {2.0, 6.0}, {3.0, 9.0}})}, 2);
    const Dataset treated = make_dataset(
        {make_series({0, 0, 0}, {{1.0, 5.0}, {2.5, 6.5}, {3.5, 9.5}})}, 2);
    const double joint = statistical_distortion(dirty, treated, {8, DistortionMode::Joint});
    const double marginal =
        statistical_distortion(dirty, treated, {8, DistortionMode::PerAttributeSum});
    CHECK(joint >= 0.0);
    CHECK(marginal >= 0.0);
    CHECK(statistical_distortion(dirty, dirty, {8, DistortionMode::PerAttributeSum}) == 0.0);
  }

  SECTION("width mismatch is an error") {
    const Dataset a = make_dataset({make_series({0, 0, 0}, {{1.0}})}, 1);
    const Dataset b = make_dataset({make_series({0, 0, 0}, {{1.0, 2.0}})}, 2);
    CHECK_THROWS(statistical_distortion(a, b));
  }
}

TEST_CASE("histogram CSV dump lists centers and masses") {
  cbtest::TempDir dir("distortion_dump");
  const Histogram h = build_histogram(points_1d({0.1, 0.9, 0.9, 0.9}), spec_1d(2, 0, 1));
  const auto path = dir.path() / "hist.csv";
  dump_histogram_csv(h, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "center1,mass");
  REQUIRE(std::getline(in, line));
  CHECK(line == "0.25,0.25");
  REQUIRE(std::getline(in, line));
  CHECK(line == "0.75,0.75");
}
