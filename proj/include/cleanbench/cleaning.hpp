#pragma once
// Cleaning methods (winsorization, ideal-mean replacement, multivariate
// Gaussian conditional imputation) and the five composite strategies.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cleanbench/core.hpp"
#include "cleanbench/glitch.hpp"
#include "cleanbench/rng.hpp"

namespace cleanbench {

// ---------------------------------------------------------------------------
// Elementary repairs
// ---------------------------------------------------------------------------

// Clamps each targeted cell to the acceptance band. Targeted cells must be
// observed; a missing value cannot be winsorized.
inline Dataset winsorize(const Dataset& ds, const OutlierLimits& limits,
                         const CellMask& targets) {
  Dataset out = ds;
  for (std::size_t si = 0; si < out.series.size(); ++si) {
    auto& obs_list = out.series[si].observations;
    for (std::size_t o = 0; o < obs_list.size(); ++o) {
      for (std::size_t a = 0; a < out.width(); ++a) {
        if (!targets.test(si, o, a)) continue;
        auto& val = obs_list[o].values[a];
        if (!val) throw Error("cannot winsorize a missing value");
        if (*val < limits.lo[a]) {
          val = limits.lo[a];
        } else if (*val > limits.hi[a]) {
          val = limits.hi[a];
        }
      }
    }
  }
  return out;
}

// Per-attribute mean over observed values; used as the ideal-mean source.
inline std::vector<double> observed_attribute_means(const Dataset& ds) {
  const std::size_t v = ds.width();
  std::vector<double> mean(v, 0.0);
  std::vector<std::size_t> n(v, 0);
  for (const auto& s : ds.series) {
    for (const auto& obs : s.observations) {
      for (std::size_t a = 0; a < v; ++a) {
        if (!obs.values[a]) continue;
        ++n[a];
        mean[a] += (*obs.values[a] - mean[a]) / static_cast<double>(n[a]);
      }
    }
  }
  for (std::size_t a = 0; a < v; ++a) {
    if (n[a] == 0)
      throw Error("attribute '" + ds.attribute_names[a] + "' has no observed values");
  }
  return mean;
}

inline Dataset mean_replace(const Dataset& ds, std::span<const double> ideal_means,
                            const CellMask& targets) {
  if (ideal_means.size() != ds.width())
    throw Error("mean vector width does not match dataset attributes");
  Dataset out = ds;
  for (std::size_t si = 0; si < out.series.size(); ++si) {
    auto& obs_list = out.series[si].observations;
    for (std::size_t o = 0; o < obs_list.size(); ++o) {
      for (std::size_t a = 0; a < out.width(); ++a) {
        if (targets.test(si, o, a)) obs_list[o].values[a] = ideal_means[a];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian model
// ---------------------------------------------------------------------------

struct GaussianModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double ridge = 0.0;  // diagonal load applied to make the covariance PD
};

// Complete-case mean and covariance (n-1 denominator) pooled across series.
// A diagonal ridge is added when the smallest eigenvalue falls below 1e-10
// times the largest (with an absolute floor so constant data stays usable).
inline GaussianModel fit_gaussian(const Dataset& ideal) {
  const std::size_t v = ideal.width();
  std::vector<Eigen::VectorXd> rows;
  for (const auto& s : ideal.series) {
    for (const auto& obs : s.observations) {
      Eigen::VectorXd row(v);
      bool complete = true;
      for (std::size_t a = 0; a < v; ++a) {
        if (!obs.values[a]) {
          complete = false;
          break;
        }
        row[static_cast<Eigen::Index>(a)] = *obs.values[a];
      }
      if (complete) rows.push_back(std::move(row));
    }
  }
  if (rows.size() < v + 1)
    throw Error("too few complete observations to fit a Gaussian model");

  GaussianModel model;
  model.mean = Eigen::VectorXd::Zero(v);
  for (const auto& row : rows) model.mean += row;
  model.mean /= static_cast<double>(rows.size());

  model.covariance = Eigen::MatrixXd::Zero(v, v);
  for (const auto& row : rows) {
    const Eigen::VectorXd d = row - model.mean;
    model.covariance += d * d.transpose();
  }
  model.covariance /= static_cast<double>(rows.size() - 1);
  model.covariance = 0.5 * (model.covariance + model.covariance.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.covariance);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double target = std::max(1e-10 * hi, 1e-12);
  if (lo < target) {
    model.ridge = target - lo;
    model.covariance += model.ridge * Eigen::MatrixXd::Identity(v, v);
  }
  return model;
}

namespace detail {

inline Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd m) {
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-12 * (m.trace() / m.rows() + 1.0) : jitter * 10.0;
    m += jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  }
  throw Error("conditional covariance is not positive definite");
}

}  // namespace detail

// Jointly redraws the targeted attributes of each observation from the
// Gaussian conditional distribution given that observation's non-targeted
// observed attributes (unconditional draw when nothing is observed).
// Deterministic given the seed: observations are visited in series order and
// normals are consumed per targeted attribute in ascending order.
inline Dataset gaussian_impute(const Dataset& ds, const GaussianModel& model,
                               const CellMask& targets, std::uint64_t seed) {
  const std::size_t v = ds.width();
  if (static_cast<std::size_t>(model.mean.size()) != v)
    throw Error("model width does not match dataset attributes");

  Dataset out = ds;
  Rng rng(seed);
  std::vector<Eigen::Index> tgt, obs_idx;

  for (std::size_t si = 0; si < out.series.size(); ++si) {
    auto& obs_list = out.series[si].observations;
    for (std::size_t o = 0; o < obs_list.size(); ++o) {
      tgt.clear();
      obs_idx.clear();
      for (std::size_t a = 0; a < v; ++a) {
        if (targets.test(si, o, a)) {
          tgt.push_back(static_cast<Eigen::Index>(a));
        } else if (obs_list[o].values[a]) {
          obs_idx.push_back(static_cast<Eigen::Index>(a));
        }
      }
      if (tgt.empty()) continue;

      const Eigen::Index nt = static_cast<Eigen::Index>(tgt.size());
      const Eigen::Index no = static_cast<Eigen::Index>(obs_idx.size());

      Eigen::VectorXd mu(nt);
      Eigen::MatrixXd sigma(nt, nt);
      for (Eigen::Index r = 0; r < nt; ++r) {
        mu[r] = model.mean[tgt[r]];
        for (Eigen::Index c = 0; c < nt; ++c)
          sigma(r, c) = model.covariance(tgt[r], tgt[c]);
      }

      if (no > 0) {
        Eigen::MatrixXd cov_oo(no, no);
        Eigen::MatrixXd cov_to(nt, no);
        Eigen::VectorXd delta(no);
        for (Eigen::Index r = 0; r < no; ++r) {
          delta[r] = *obs_list[o].values[static_cast<std::size_t>(obs_idx[r])] -
                     model.mean[obs_idx[r]];
          for (Eigen::Index c = 0; c < no; ++c)
            cov_oo(r, c) = model.covariance(obs_idx[r], obs_idx[c]);
          for (Eigen::Index t = 0; t < nt; ++t)
            cov_to(t, r) = model.covariance(tgt[t], obs_idx[r]);
        }
        const Eigen::LLT<Eigen::MatrixXd> oo(cov_oo);
        if (oo.info() != Eigen::Success)
          throw Error("observed-block covariance is not positive definite");
        mu += cov_to * oo.solve(delta);
        sigma -= cov_to * oo.solve(cov_to.transpose());
        sigma = 0.5 * (sigma + sigma.transpose()).eval();
      }

      const Eigen::MatrixXd chol = detail::cholesky_with_jitter(sigma);
      Eigen::VectorXd z(nt);
      for (Eigen::Index r = 0; r < nt; ++r) z[r] = rng.normal();
      const Eigen::VectorXd draw = mu + chol * z;
      for (Eigen::Index r = 0; r < nt; ++r)
        obs_list[o].values[static_cast<std::size_t>(tgt[r])] = draw[r];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class ImputeMethod { GaussianImpute, MeanReplace, None };
enum class OutlierMethod { Winsorize, None };

// One of the five canonical strategies, or any explicit (method, method) pair.
struct Strategy {
  int id = 0;
  ImputeMethod missing_inconsistent = ImputeMethod::None;
  OutlierMethod outlier = OutlierMethod::None;

  static Strategy by_id(int id) {
    switch (id) {
      case 1: return {1, ImputeMethod::GaussianImpute, OutlierMethod::Winsorize};
      case 2: return {2, ImputeMethod::GaussianImpute, OutlierMethod::None};
      case 3: return {3, ImputeMethod::None, OutlierMethod::Winsorize};
      case 4: return {4, ImputeMethod::MeanReplace, OutlierMethod::None};
      case 5: return {5, ImputeMethod::MeanReplace, OutlierMethod::Winsorize};
      default: throw Error("strategy id must be 1..5");
    }
  }
};

// Everything a strategy application produced, kept around so callers can
// re-detect and measure without refitting.
struct StrategyApplication {
  Dataset dirty_working;      // transformed dirty sample
  CellMask dirty_untransformed;
  Dataset treated;            // working space
  CellMask treated_untransformed;
  OutlierLimits limits;
  GlitchScan dirty_scan;
  CellMask impute_targets;
  CellMask winsorize_targets;
  std::size_t selected_series = 0;
};

// Full strategy pipeline on one (dirty, ideal) pair of raw datasets:
// transform, fit limits/means/model from the ideal sample, detect, rank
// series, treat the top ceil(x%) of them, and leave the rest untouched.
inline StrategyApplication run_strategy(const Dataset& dirty, const Dataset& ideal,
                                        const Strategy& strategy,
                                        std::span<const ConstraintRule> rules,
                                        const GlitchWeights& weights,
                                        const Transform& tf, double cost_fraction,
                                        std::uint64_t seed,
                                        const OutlierLimits* fixed_limits = nullptr) {
  if (cost_fraction < 0.0 || cost_fraction > 100.0)
    throw Error("cost fraction must lie in [0, 100]");
  validate_rules(rules, dirty.width());
  weights.validate();

  StrategyApplication app;
  app.dirty_working = apply_transform(dirty, tf, &app.dirty_untransformed);
  CellMask ideal_untransformed;
  const Dataset ideal_working = apply_transform(ideal, tf, &ideal_untransformed);

  app.limits = fixed_limits ? *fixed_limits : fit_outlier_limits(ideal_working);
  app.dirty_scan =
      scan_glitches(app.dirty_working, rules, app.limits, tf, app.dirty_untransformed);

  const auto rank = series_glitch_rank(app.dirty_working, app.dirty_scan, weights);
  const std::size_t n_series = app.dirty_working.series.size();
  const std::size_t n_selected = std::min(
      n_series, static_cast<std::size_t>(
                    std::ceil(cost_fraction * static_cast<double>(n_series) / 100.0)));

  std::vector<std::uint8_t> selected(n_series, 0);
  for (std::size_t r = 0; r < n_selected; ++r) selected[rank[r].series] = 1;
  app.selected_series = n_selected;

  app.impute_targets = CellMask(app.dirty_working);
  app.winsorize_targets = CellMask(app.dirty_working);
  for (std::size_t si = 0; si < n_series; ++si) {
    if (!selected[si]) continue;
    const std::size_t len = app.dirty_working.series[si].length();
    for (std::size_t o = 0; o < len; ++o) {
      for (std::size_t a = 0; a < app.dirty_working.width(); ++a) {
        if (app.dirty_scan.missing.test(si, o, a) ||
            app.dirty_scan.inconsistent.test(si, o, a))
          app.impute_targets.set(si, o, a);
        if (app.dirty_scan.outlier.test(si, o, a))
          app.winsorize_targets.set(si, o, a);
      }
    }
  }

  app.treated = app.dirty_working;
  app.treated_untransformed = app.dirty_untransformed;

  switch (strategy.missing_inconsistent) {
    case ImputeMethod::GaussianImpute: {
      const GaussianModel model = fit_gaussian(ideal_working);
      app.treated = gaussian_impute(app.treated, model, app.impute_targets, seed);
      break;
    }
    case ImputeMethod::MeanReplace: {
      const std::vector<double> means = observed_attribute_means(ideal_working);
      app.treated = mean_replace(app.treated, means, app.impute_targets);
      break;
    }
    case ImputeMethod::None:
      break;
  }
  if (strategy.outlier == OutlierMethod::Winsorize)
    app.treated = winsorize(app.treated, app.limits, app.winsorize_targets);

  // Repaired cells now hold proper working-space values.
  if (tf.has_log()) {
    for (std::size_t si = 0; si < n_series; ++si) {
      const std::size_t len = app.treated.series[si].length();
      for (std::size_t o = 0; o < len; ++o) {
        for (std::size_t a = 0; a < app.treated.width(); ++a) {
          const bool repaired =
              (strategy.missing_inconsistent != ImputeMethod::None &&
               app.impute_targets.test(si, o, a)) ||
              (strategy.outlier == OutlierMethod::Winsorize &&
               app.winsorize_targets.test(si, o, a));
          if (repaired) app.treated_untransformed.set(si, o, a, false);
        }
      }
    }
  }

  app.treated.role = Role::Treated;
  return app;
}

// Treated dataset (working space) for one strategy application.
inline Dataset apply_strategy(const Dataset& dirty, const Dataset& ideal,
                              const Strategy& strategy,
                              std::span<const ConstraintRule> rules,
                              const GlitchWeights& weights, const Transform& tf,
                              double cost_fraction, std::uint64_t seed) {
  return run_strategy(dirty, ideal, strategy, rules, weights, tf, cost_fraction, seed)
      .treated;
}

}  // namespace cleanbench
