#pragma once
// Seeded synthetic hierarchical time-series generator with controlled glitch
// injection, standing in for proprietary network monitoring data.
//
// Clean values satisfy the reference constraints by construction: attr1 is
// lognormal (non-negative, right-skewed), attr2 is normal, attr3 is
// Kumaraswamy-distributed on [0,1]. Glitches are injected per cell: deletion,
// corruption to rule-violating magnitudes, or inflation to extreme values.
// Injected inconsistencies stay small enough to remain inside the 3-sigma
// band, and outliers are only injected on attr1/attr2, so the injected glitch
// types do not overlap on a cell; missingness on attr3 co-occurs with
// rule-3 inconsistency on attr1 through the constraint itself.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cleanbench/core.hpp"
#include "cleanbench/rng.hpp"

namespace cleanbench {

struct SynthSpec {
  // Node counts per layer; total series = layers_i * layers_j * layers_k.
  int layers_i = 2;
  int layers_j = 10;
  int layers_k = 10;
  int length = 170;  // T, observations per series

  // Attribute models. attr1 is lognormal; attr2 normal; attr3 bounded in
  // [0,1] as a tight core flanked by two small side modes whose weights
  // balance their offsets, so the mean stays on the core. The side modes
  // inflate a fitted Gaussian's deviation without moving its mean, which is
  // what separates point replacement from distribution-based imputation.
  double attr1_log_mu = 1.0;
  double attr1_log_sigma = 0.55;
  double attr2_mu = 10.0;
  double attr2_sigma = 1.0;
  double attr3_center = 0.66;
  double attr3_core_width = 0.01;
  double attr3_lump_lo_offset = 0.216;
  double attr3_lump_lo_weight = 0.10;
  double attr3_lump_hi_offset = 0.27;
  double attr3_lump_hi_weight = 0.08;
  double attr3_lump_width = 0.01;

  // Per-cell injection rates for the dirty series component. Missingness is
  // sensor-dependent: per-attribute rate = p_missing * missing_weight[attr],
  // with weights averaging to 1. Corruption applies to attr1 only; attr3
  // inconsistencies arise through the conditional-populated constraint.
  double p_missing = 0.205;
  std::array<double, 3> missing_weights{1.00, 0.10, 1.90};
  double p_inconsistent_extra = 0.52;
  double p_outlier = 0.09;

  // Two-component dirtiness mixture: mostly-clean series keep a scaled-down
  // rate so the ideal screen has material membership.
  double clean_series_fraction = 0.30;
  double clean_rate_scale = 0.10;

  std::uint64_t seed = 0x5EEDu;

  void validate() const {
    if (layers_i < 1 || layers_j < 1 || layers_k < 1)
      throw Error("layer counts must be positive");
    if (length < 1) throw Error("series length must be positive");
    for (double p : {p_missing, p_inconsistent_extra, p_outlier}) {
      if (p < 0.0 || p >= 1.0) throw Error("injection rates must lie in [0, 1)");
    }
    if (p_missing + p_inconsistent_extra + p_outlier >= 1.0)
      throw Error("injection rates must sum below 1");
    if (clean_series_fraction < 0.0 || clean_series_fraction > 1.0)
      throw Error("clean series fraction must lie in [0, 1]");
    if (attr1_log_sigma <= 0.0 || attr2_sigma <= 0.0)
      throw Error("attribute scales must be positive");
    if (attr3_lump_lo_weight < 0.0 || attr3_lump_hi_weight < 0.0 ||
        attr3_lump_lo_weight + attr3_lump_hi_weight >= 1.0)
      throw Error("attr3 lump weights must lie in [0, 1)");
    const double lo_reach = attr3_lump_lo_offset + 0.5 * attr3_lump_width;
    const double hi_reach = attr3_lump_hi_offset + 0.5 * attr3_lump_width;
    if (attr3_center - lo_reach < 0.0 || attr3_center + hi_reach > 1.0 ||
        attr3_core_width <= 0.0 || attr3_lump_width <= 0.0)
      throw Error("attr3 model must stay inside [0, 1]");
    for (double w : missing_weights) {
      if (w < 0.0 || w * p_missing >= 1.0)
        throw Error("per-attribute missing rates must lie in [0, 1)");
    }
  }
};

namespace detail {

struct SynthAttrStats {
  double mean1, std1;  // lognormal moments for attr1
};

inline SynthAttrStats attr_stats(const SynthSpec& spec) {
  const double s2 = spec.attr1_log_sigma * spec.attr1_log_sigma;
  const double mean1 = std::exp(spec.attr1_log_mu + 0.5 * s2);
  const double std1 = mean1 * std::sqrt(std::exp(s2) - 1.0);
  return {mean1, std1};
}

}  // namespace detail

// Deterministic given spec.seed; each series owns a derived RNG stream.
inline Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const auto stats = detail::attr_stats(spec);
  const double attr1_scale = std::exp(spec.attr1_log_mu);  // median of attr1

  Dataset ds;
  ds.attribute_names = {"attr1", "attr2", "attr3"};
  ds.role = Role::Dirty;
  ds.series.reserve(static_cast<std::size_t>(spec.layers_i) * spec.layers_j *
                    spec.layers_k);

  std::uint64_t series_index = 0;
  for (int i = 0; i < spec.layers_i; ++i) {
    for (int j = 0; j < spec.layers_j; ++j) {
      for (int k = 0; k < spec.layers_k; ++k, ++series_index) {
        Rng rng(mix_seed(spec.seed, series_index));
        const bool mostly_clean = rng.uniform() < spec.clean_series_fraction;
        const double scale = mostly_clean ? spec.clean_rate_scale : 1.0;
        std::array<double, 3> pm;
        for (std::size_t a = 0; a < 3; ++a)
          pm[a] = spec.p_missing * spec.missing_weights[a] * scale;
        const double pi = spec.p_inconsistent_extra * scale;
        const double po = spec.p_outlier * scale;

        TimeSeries series;
        series.node = {i, j, k, 0};
        series.observations.resize(spec.length);
        for (int t = 0; t < spec.length; ++t) {
          Observation& obs = series.observations[t];
          obs.t = t;
          obs.values.resize(3);
          for (std::size_t a = 0; a < 3; ++a) {
            double value = 0.0;
            switch (a) {
              case 0: value = rng.lognormal(spec.attr1_log_mu, spec.attr1_log_sigma); break;
              case 1: value = rng.normal(spec.attr2_mu, spec.attr2_sigma); break;
              case 2: {
                const double mix = rng.uniform();
                double center = spec.attr3_center;
                double width = spec.attr3_core_width;
                if (mix < spec.attr3_lump_lo_weight) {
                  center -= spec.attr3_lump_lo_offset;
                  width = spec.attr3_lump_width;
                } else if (mix < spec.attr3_lump_lo_weight + spec.attr3_lump_hi_weight) {
                  center += spec.attr3_lump_hi_offset;
                  width = spec.attr3_lump_width;
                }
                value = center + width * (rng.kumaraswamy(2.0, 2.0) - 0.5);
                break;
              }
            }

            // Disjoint per-attribute injection slices: corruption applies to
            // attr1 only, outlier inflation to attr1/attr2.
            const double corrupt_hi = pm[a] + (a == 0 ? pi : 0.0);
            const double outlier_hi = corrupt_hi + (a != 2 ? po : 0.0);
            const double u = rng.uniform();
            if (u < pm[a]) {
              continue;  // value stays missing
            }
            if (u < corrupt_hi) {
              // Negative, rule-violating, but inside the 3-sigma band.
              value = -rng.uniform(0.0005, 0.005) * attr1_scale;
            } else if (u < outlier_hi) {
              // Extreme value: inflate by a large factor, clipped into a band
              // that is reliably detectable yet does not wreck the 3-sigma
              // fit when a trickle survives the ideal screen.
              const double factor = rng.uniform(8.0, 15.0);
              const double floor_sigma = rng.uniform(4.5, 8.0);
              const double mean = a == 0 ? stats.mean1 : spec.attr2_mu;
              const double sd = a == 0 ? stats.std1 : spec.attr2_sigma;
              value = std::clamp(value * factor, mean + floor_sigma * sd, mean + 9.0 * sd);
            }
            obs.values[a] = value;
          }
        }
        ds.series.push_back(std::move(series));
      }
    }
  }
  return ds;
}

// Canonical fixed-seed dataset used by the acceptance experiments:
// 200 series of length 170 on three attributes.
inline SynthSpec reference_spec() {
  SynthSpec spec;
  spec.layers_i = 2;
  spec.layers_j = 10;
  spec.layers_k = 10;
  spec.length = 170;
  spec.seed = 0x00C1EA7B0A7ull;
  return spec;
}

inline Dataset reference_dataset() { return generate(reference_spec()); }

}  // namespace cleanbench
