#pragma once
// Experiment configuration file: JSON with an input section (dataset path or
// synth spec), the experiment parameters, the constraint rules, and an
// output directory. Attribute indices in rules and transforms are 0-based.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanbench/core.hpp"
#include "cleanbench/experiment.hpp"
#include "cleanbench/synth.hpp"

namespace cleanbench {

struct RunConfig {
  std::optional<std::filesystem::path> dataset_path;
  std::optional<SynthSpec> synth;
  ExperimentConfig experiment = ExperimentConfig::defaults();
  std::filesystem::path output_dir = "out";
};

namespace detail {

using json = nlohmann::json;

inline SynthSpec parse_synth(const json& j) {
  SynthSpec spec;
  if (j.contains("layers")) {
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != 3)
      throw Error("config: synth.layers must be [i, j, k]");
    spec.layers_i = layers[0].get<int>();
    spec.layers_j = layers[1].get<int>();
    spec.layers_k = layers[2].get<int>();
  }
  spec.length = j.value("length", spec.length);
  spec.attr1_log_mu = j.value("attr1_log_mu", spec.attr1_log_mu);
  spec.attr1_log_sigma = j.value("attr1_log_sigma", spec.attr1_log_sigma);
  spec.attr2_mu = j.value("attr2_mu", spec.attr2_mu);
  spec.attr2_sigma = j.value("attr2_sigma", spec.attr2_sigma);
  spec.attr3_center = j.value("attr3_center", spec.attr3_center);
  spec.attr3_core_width = j.value("attr3_core_width", spec.attr3_core_width);
  spec.attr3_lump_lo_offset = j.value("attr3_lump_lo_offset", spec.attr3_lump_lo_offset);
  spec.attr3_lump_lo_weight = j.value("attr3_lump_lo_weight", spec.attr3_lump_lo_weight);
  spec.attr3_lump_hi_offset = j.value("attr3_lump_hi_offset", spec.attr3_lump_hi_offset);
  spec.attr3_lump_hi_weight = j.value("attr3_lump_hi_weight", spec.attr3_lump_hi_weight);
  spec.attr3_lump_width = j.value("attr3_lump_width", spec.attr3_lump_width);
  spec.p_missing = j.value("p_missing", spec.p_missing);
  if (j.contains("missing_weights")) {
    const auto w = j.at("missing_weights").get<std::vector<double>>();
    if (w.size() != 3) throw Error("config: missing_weights must have 3 entries");
    std::copy(w.begin(), w.end(), spec.missing_weights.begin());
  }
  spec.p_inconsistent_extra = j.value("p_inconsistent_extra", spec.p_inconsistent_extra);
  spec.p_outlier = j.value("p_outlier", spec.p_outlier);
  spec.clean_series_fraction = j.value("clean_series_fraction", spec.clean_series_fraction);
  spec.clean_rate_scale = j.value("clean_rate_scale", spec.clean_rate_scale);
  spec.seed = j.value("seed", spec.seed);
  spec.validate();
  return spec;
}

inline std::vector<ConstraintRule> parse_rules(const json& j) {
  std::vector<ConstraintRule> rules;
  for (const auto& entry : j) {
    const std::string kind = entry.at("kind").get<std::string>();
    if (kind == "lower-bound") {
      rules.push_back(ConstraintRule::lower_bound(entry.at("attr").get<std::size_t>(),
                                                  entry.at("bound").get<double>()));
    } else if (kind == "range") {
      rules.push_back(ConstraintRule::range(entry.at("attr").get<std::size_t>(),
                                            entry.at("lo").get<double>(),
                                            entry.at("hi").get<double>()));
    } else if (kind == "conditional-populated") {
      rules.push_back(ConstraintRule::conditional_populated(
          entry.at("attr").get<std::size_t>(), entry.at("requires").get<std::size_t>()));
    } else {
      throw Error("config: unknown rule kind '" + kind + "'");
    }
  }
  return rules;
}

inline Transform parse_transform(const json& j) {
  Transform tf;
  for (const auto& entry : j) {
    const std::string name = entry.get<std::string>();
    if (name == "identity") {
      tf.per_attr.push_back(AttrTransform::Identity);
    } else if (name == "log") {
      tf.per_attr.push_back(AttrTransform::NaturalLog);
    } else {
      throw Error("config: transform entries must be 'identity' or 'log'");
    }
  }
  return tf;
}

inline void parse_experiment(const json& j, ExperimentConfig& cfg) {
  cfg.replications = j.value("replications", cfg.replications);
  cfg.sample_series = j.value("sample_series", cfg.sample_series);
  if (j.contains("strategies")) {
    cfg.strategies.clear();
    for (const auto& id : j.at("strategies"))
      cfg.strategies.push_back(Strategy::by_id(id.get<int>()));
  }
  if (j.contains("cost_fractions"))
    cfg.cost_fractions = j.at("cost_fractions").get<std::vector<double>>();
  cfg.ideal_threshold = j.value("ideal_threshold", cfg.ideal_threshold);
  if (j.contains("weights")) {
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kGlitchTypes)
      throw Error("config: weights must have 3 entries [missing, inconsistent, outlier]");
    std::copy(w.begin(), w.end(), cfg.weights.w.begin());
  }
  if (j.contains("transform")) cfg.transform = parse_transform(j.at("transform"));
  cfg.master_seed = j.value("master_seed", cfg.master_seed);
  if (j.contains("bins")) {
    const auto& bins = j.at("bins");
    if (bins.is_array()) {
      cfg.distortion.bins = bins.get<std::vector<int>>();
    } else {
      cfg.distortion.bins = {bins.get<int>()};
    }
  }
  if (j.contains("distortion_mode")) {
    const std::string mode = j.at("distortion_mode").get<std::string>();
    if (mode == "joint") {
      cfg.distortion.mode = DistortionMode::Joint;
    } else if (mode == "per-attribute-sum") {
      cfg.distortion.mode = DistortionMode::PerAttributeSum;
    } else {
      throw Error("config: distortion_mode must be 'joint' or 'per-attribute-sum'");
    }
  }
  cfg.refit_limits_per_replication =
      j.value("refit_limits", cfg.refit_limits_per_replication);
}

}  // namespace detail

inline RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());

  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }

  RunConfig cfg;
  try {
    if (!j.contains("input")) throw Error("config: missing 'input' section");
    const auto& input = j.at("input");
    const bool has_dataset = input.contains("dataset");
    const bool has_synth = input.contains("synth");
    if (has_dataset == has_synth)
      throw Error("config: input must contain exactly one of 'dataset' or 'synth'");
    if (has_dataset) {
      cfg.dataset_path = std::filesystem::path(input.at("dataset").get<std::string>());
      if (!std::filesystem::exists(*cfg.dataset_path))
        throw Error("config: dataset file not found: " + cfg.dataset_path->string());
    } else {
      cfg.synth = detail::parse_synth(input.at("synth"));
    }

    if (j.contains("rules")) cfg.experiment.rules = detail::parse_rules(j.at("rules"));
    if (j.contains("experiment")) detail::parse_experiment(j.at("experiment"), cfg.experiment);
    if (j.contains("output_dir"))
      cfg.output_dir = std::filesystem::path(j.at("output_dir").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace cleanbench
