#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "exleak/dataset.hpp"

namespace exleak {

/// Additive template model: trial = category_amplitude * G_k
///   + exemplar_amplitude * E_e + noise_sigma * N, with G_k and E_e drawn
/// once per seed and scaled to unit Frobenius norm.
struct SynthConfig {
  int n_categories = 6;
  int exemplars_per_category = 12;
  /// Optional per-category exemplar counts; when non-empty it must have
  /// n_categories entries and replaces exemplars_per_category.
  std::vector<int> exemplar_counts;
  int trials_per_exemplar = 72;
  int n_subjects = 10;
  int n_channels = 16;
  int n_samples = 32;
  double category_amplitude = 0.3;
  double exemplar_amplitude = 0.3;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  int exemplars_in_category(int category) const;
  int total_exemplars() const;
};

void validate(const SynthConfig& cfg);

SynthConfig preset(std::string_view name);

/// The per-pseudocategory composition the gifford-like preset is built from.
const std::vector<int>& gifford_composition();

Dataset generate_synthetic(const SynthConfig& cfg);

/// Template matrices exactly as generate_synthetic draws them (channel-major).
std::vector<float> category_template(const SynthConfig& cfg, int category);
std::vector<float> exemplar_template(const SynthConfig& cfg, int exemplar);

nlohmann::json to_json(const SynthConfig& cfg);
/// Reads every known key from `j` on top of `base`; unknown keys are ConfigInvalid.
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

}  // namespace exleak
