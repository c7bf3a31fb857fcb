#pragma once
// Command implementations behind the CLI front end: generate, audit, run, emd.
// All emitted files are deterministic functions of (inputs, config, seed);
// doubles are written in shortest round-trip form and row order is fixed.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "cleanbench/config.hpp"
#include "cleanbench/core.hpp"
#include "cleanbench/experiment.hpp"
#include "cleanbench/glitch.hpp"
#include "cleanbench/synth.hpp"

namespace cleanbench {

namespace detail {

inline Dataset load_input(const RunConfig& cfg) {
  if (cfg.dataset_path) return load_dataset(*cfg.dataset_path);
  return generate(*cfg.synth);
}

inline void ensure_output_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
}

}  // namespace detail

// Writes the configured synthetic dataset as CSV. Requires a synth input.
inline std::filesystem::path cmd_generate(const RunConfig& cfg) {
  if (!cfg.synth) throw Error("generate requires a synth input section");
  detail::ensure_output_dir(cfg);
  const Dataset ds = generate(*cfg.synth);
  const auto path = cfg.output_dir / "dataset.csv";
  save_dataset(ds, path);
  std::cout << "wrote " << ds.series.size() << " series to " << path.string() << "\n";
  return path;
}

// Glitch report: per-type percentages on stdout plus a per-time-index glitch
// count CSV (one row per t, three count columns).
inline std::array<double, kGlitchTypes> cmd_audit(const RunConfig& cfg) {
  detail::ensure_output_dir(cfg);
  const Dataset raw = detail::load_input(cfg);
  const ExperimentConfig& exp = cfg.experiment;
  const Transform tf = exp.transform_for(raw);

  const Dataset ideal = extract_ideal(raw, exp.rules, exp.ideal_threshold, tf);
  CellMask ideal_skip, skip;
  const OutlierLimits limits = fit_outlier_limits(apply_transform(ideal, tf, &ideal_skip));
  const Dataset working = apply_transform(raw, tf, &skip);
  const GlitchScan scan = scan_glitches(working, exp.rules, limits, tf, skip);

  const auto pct = glitch_percentages(working, scan);
  std::printf("missing %%: %.6f\ninconsistent %%: %.6f\noutlier %%: %.6f\n", pct[0],
              pct[1], pct[2]);
  std::printf("ideal series: %zu of %zu\n", ideal.series.size(), raw.series.size());

  std::map<std::int64_t, std::array<std::size_t, kGlitchTypes>> per_t;
  for (std::size_t si = 0; si < working.series.size(); ++si) {
    const auto& obs_list = working.series[si].observations;
    for (std::size_t o = 0; o < obs_list.size(); ++o) {
      auto& counts = per_t[obs_list[o].t];
      for (std::size_t a = 0; a < working.width(); ++a) {
        counts[0] += scan.missing.test(si, o, a);
        counts[1] += scan.inconsistent.test(si, o, a);
        counts[2] += scan.outlier.test(si, o, a);
      }
    }
  }

  const auto path = cfg.output_dir / "glitch_counts.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "t,missing,inconsistent,outlier\n";
  for (const auto& [t, counts] : per_t)
    out << t << ',' << counts[0] << ',' << counts[1] << ',' << counts[2] << '\n';
  return pct;
}

namespace detail {

inline void write_results_csv(const std::filesystem::path& path,
                              std::span<const ReplicationResult> results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "replication,strategy,fraction,improvement,improvement_raw,emd,"
         "missing_dirty,inconsistent_dirty,outlier_dirty,"
         "missing_treated,inconsistent_treated,outlier_treated\n";
  for (const auto& r : results) {
    out << r.replication << ',' << r.strategy_id << ',' << format_double(r.cost_fraction)
        << ',' << format_double(r.glitch_improvement) << ','
        << format_double(r.glitch_improvement_raw) << ',' << format_double(r.emd);
    for (double p : r.dirty_pct) out << ',' << format_double(p);
    for (double p : r.treated_pct) out << ',' << format_double(p);
    out << '\n';
  }
}

inline void write_summary_csv(const std::filesystem::path& path,
                              std::span<const SummaryRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "strategy,fraction,n,improvement_mean,improvement_sd,emd_mean,emd_sd,"
         "missing_dirty_mean,inconsistent_dirty_mean,outlier_dirty_mean,"
         "missing_treated_mean,inconsistent_treated_mean,outlier_treated_mean\n";
  for (const auto& row : rows) {
    out << row.strategy_id << ',' << format_double(row.cost_fraction) << ',' << row.n
        << ',' << format_double(row.improvement_mean) << ','
        << format_double(row.improvement_sd) << ',' << format_double(row.emd_mean) << ','
        << format_double(row.emd_sd);
    for (double p : row.dirty_pct_mean) out << ',' << format_double(p);
    for (double p : row.treated_pct_mean) out << ',' << format_double(p);
    out << '\n';
  }
}

inline void write_scatter_csv(const std::filesystem::path& path,
                              std::span<const ReplicationResult> results,
                              bool (*keep)(const ReplicationResult&, const ExperimentConfig&),
                              const ExperimentConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "strategy,fraction,improvement,emd\n";
  for (const auto& r : results) {
    if (!keep(r, cfg)) continue;
    out << r.strategy_id << ',' << format_double(r.cost_fraction) << ','
        << format_double(r.glitch_improvement) << ',' << format_double(r.emd) << '\n';
  }
}

inline void write_failures_csv(const std::filesystem::path& path,
                               std::span<const ReplicationFailure> failures) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "replication,strategy,fraction,error\n";
  for (const auto& f : failures) {
    std::string msg = f.message;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << f.replication << ',' << f.strategy_id << ',' << format_double(f.cost_fraction)
        << ',' << msg << '\n';
  }
}

}  // namespace detail

// Full experiment. Emits results.csv, summary.csv, two scatter-data files
// (strategy comparison at the highest fraction; cost sweep for the first
// strategy), and failures.csv. Returns nonzero only when every replication
// combination failed.
inline int cmd_run(const RunConfig& cfg) {
  detail::ensure_output_dir(cfg);
  const Dataset raw = detail::load_input(cfg);

  const ExperimentOutput output = run_experiment(raw, cfg.experiment);

  detail::write_results_csv(cfg.output_dir / "results.csv", output.results);
  if (!output.results.empty()) {
    detail::write_summary_csv(cfg.output_dir / "summary.csv",
                              summarize(output.results));
  }
  detail::write_scatter_csv(
      cfg.output_dir / "strategy_scatter.csv", output.results,
      [](const ReplicationResult& r, const ExperimentConfig& c) {
        return c.cost_fractions.empty() ||
               r.cost_fraction == *std::max_element(c.cost_fractions.begin(),
                                                    c.cost_fractions.end());
      },
      cfg.experiment);
  detail::write_scatter_csv(
      cfg.output_dir / "cost_scatter.csv", output.results,
      [](const ReplicationResult& r, const ExperimentConfig& c) {
        return !c.strategies.empty() && r.strategy_id == c.strategies.front().id;
      },
      cfg.experiment);
  detail::write_failures_csv(cfg.output_dir / "failures.csv", output.failures);

  std::cout << "results: " << output.results.size() << " rows, failures: "
            << output.failures.size() << ", ideal series: " << output.ideal_series
            << "\n";
  if (output.results.empty() && !output.failures.empty()) return 1;
  return 0;
}

// Statistical distortion between two dataset files, printed to stdout.
inline double cmd_emd(const std::filesystem::path& file_a,
                      const std::filesystem::path& file_b, int bins) {
  const Dataset a = load_dataset(file_a);
  const Dataset b = load_dataset(file_b);
  if (a.width() != b.width()) throw Error("datasets have different attribute counts");
  DistortionOptions opts;
  opts.bins = {bins};
  const double value = statistical_distortion(a, b, opts);
  std::printf("%.15g\n", value);
  return value;
}

}  // namespace cleanbench
