#include "exleak/synth.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak {

namespace {

constexpr std::uint64_t kCategoryStream = 1;
constexpr std::uint64_t kExemplarStream = 2;
constexpr std::uint64_t kTrialStream = 3;

std::vector<double> unit_template(std::uint64_t key, std::size_t dim) {
  CounterRng rng(key);
  std::vector<double> t(dim);
  double norm2 = 0.0;
  for (auto& v : t) {
    v = rng.normal();
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : t) v *= inv;
  return t;
}

}  // namespace

int SynthConfig::exemplars_in_category(int category) const {
  return exemplar_counts.empty() ? exemplars_per_category : exemplar_counts.at(static_cast<std::size_t>(category));
}

int SynthConfig::total_exemplars() const {
  if (!exemplar_counts.empty()) return std::accumulate(exemplar_counts.begin(), exemplar_counts.end(), 0);
  return n_categories * exemplars_per_category;
}

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
  if (c.n_categories < 1) fail("n_categories must be >= 1");
  if (c.exemplar_counts.empty()) {
    if (c.exemplars_per_category < 1) fail("exemplars_per_category must be >= 1");
  } else {
    if (static_cast<int>(c.exemplar_counts.size()) != c.n_categories)
      fail("exemplar_counts must have n_categories entries");
    for (int n : c.exemplar_counts)
      if (n < 1) fail("exemplar_counts entries must be >= 1");
  }
  if (c.trials_per_exemplar < 1) fail("trials_per_exemplar must be >= 1");
  if (c.n_subjects < 1) fail("n_subjects must be >= 1");
  if (c.n_channels < 1 || c.n_samples < 1) fail("n_channels and n_samples must be >= 1");
  if (!(c.category_amplitude >= 0.0) || !(c.exemplar_amplitude >= 0.0)) fail("amplitudes must be >= 0");
  if (!(c.noise_sigma > 0.0) || !std::isfinite(c.noise_sigma)) fail("noise_sigma must be > 0");
}

const std::vector<int>& gifford_composition() {
  // animals, bird, clothing, container, electronic device, food,
  // musical instrument, sports equipment, tools, vehicles
  static const std::vector<int> composition{3, 1, 2, 1, 1, 6, 1, 2, 3, 3};
  return composition;
}

SynthConfig preset(std::string_view name) {
  SynthConfig c;
  if (name == "kaneshiro-like") {
    c.n_categories = 6;
    c.exemplars_per_category = 12;
    c.trials_per_exemplar = 72;
    c.n_subjects = 10;
    c.n_channels = 16;
    c.n_samples = 32;
  } else if (name == "gifford-like") {
    constexpr int kPseudocategories = 5;
    c.n_categories = static_cast<int>(gifford_composition().size());
    c.exemplars_per_category = kPseudocategories;
    for (int n : gifford_composition()) c.exemplar_counts.push_back(n * kPseudocategories);
    c.trials_per_exemplar = 80;
    c.n_subjects = 10;
    c.n_channels = 17;
    c.n_samples = 100;
  } else {
    throw Error(ErrorCode::UnknownPreset, fmt::format("unknown preset '{}' (expected kaneshiro-like or gifford-like)", name));
  }
  c.category_amplitude = 0.3;
  c.exemplar_amplitude = 0.3;
  c.noise_sigma = 1.0;
  return c;
}

std::vector<float> category_template(const SynthConfig& cfg, int category) {
  const auto dim = static_cast<std::size_t>(cfg.n_channels) * cfg.n_samples;
  const auto t = unit_template(derive_key(cfg.seed, {kCategoryStream, static_cast<std::uint64_t>(category)}), dim);
  return {t.begin(), t.end()};
}

std::vector<float> exemplar_template(const SynthConfig& cfg, int exemplar) {
  const auto dim = static_cast<std::size_t>(cfg.n_channels) * cfg.n_samples;
  const auto t = unit_template(derive_key(cfg.seed, {kExemplarStream, static_cast<std::uint64_t>(exemplar)}), dim);
  return {t.begin(), t.end()};
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  const auto dim = static_cast<std::size_t>(cfg.n_channels) * cfg.n_samples;

  DatasetManifest m;
  m.n_channels = cfg.n_channels;
  m.n_samples = cfg.n_samples;
  std::vector<int> exemplar_category;
  for (int k = 0; k < cfg.n_categories; ++k) {
    m.category_names.push_back(fmt::format("category_{}", k));
    for (int j = 0; j < cfg.exemplars_in_category(k); ++j) {
      m.exemplar_names.push_back(fmt::format("category_{}/exemplar_{}", k, j));
      exemplar_category.push_back(k);
    }
  }
  for (int s = 0; s < cfg.n_subjects; ++s) m.subject_ids.push_back(s);

  std::vector<std::vector<double>> cat_templates;
  for (int k = 0; k < cfg.n_categories; ++k)
    cat_templates.push_back(unit_template(derive_key(cfg.seed, {kCategoryStream, static_cast<std::uint64_t>(k)}), dim));
  std::vector<std::vector<double>> ex_templates;
  for (std::size_t e = 0; e < exemplar_category.size(); ++e)
    ex_templates.push_back(unit_template(derive_key(cfg.seed, {kExemplarStream, e}), dim));

  const std::size_t n_trials =
      static_cast<std::size_t>(cfg.n_subjects) * exemplar_category.size() * cfg.trials_per_exemplar;
  m.n_trials = static_cast<std::int64_t>(n_trials);
  std::vector<float> payload(n_trials * dim);
  std::vector<TrialLabels> table;
  table.reserve(n_trials);

  // Trial order: subject, then exemplar, then repetition. Each trial's noise
  // comes from its own substream keyed by those coordinates.
  std::size_t row = 0;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    for (std::size_t e = 0; e < exemplar_category.size(); ++e) {
      const int k = exemplar_category[e];
      for (int r = 0; r < cfg.trials_per_exemplar; ++r, ++row) {
        CounterRng noise(derive_key(cfg.seed, {kTrialStream, static_cast<std::uint64_t>(s), e,
                                               static_cast<std::uint64_t>(r)}));
        float* out = payload.data() + row * dim;
        for (std::size_t i = 0; i < dim; ++i) {
          out[i] = static_cast<float>(cfg.category_amplitude * cat_templates[k][i] +
                                      cfg.exemplar_amplitude * ex_templates[e][i] + cfg.noise_sigma * noise.normal());
        }
        table.push_back({static_cast<int>(e), k, s});
      }
    }
  }
  return Dataset(std::move(m), std::move(payload), std::move(table));
}

nlohmann::json to_json(const SynthConfig& c) {
  return {
      {"n_categories", c.n_categories},
      {"exemplars_per_category", c.exemplars_per_category},
      {"exemplar_counts", c.exemplar_counts},
      {"trials_per_exemplar", c.trials_per_exemplar},
      {"n_subjects", c.n_subjects},
      {"n_channels", c.n_channels},
      {"n_samples", c.n_samples},
      {"category_amplitude", c.category_amplitude},
      {"exemplar_amplitude", c.exemplar_amplitude},
      {"noise_sigma", c.noise_sigma},
      {"seed", c.seed},
  };
}

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "synth config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_categories") c.n_categories = value.get<int>();
      else if (key == "exemplars_per_category") c.exemplars_per_category = value.get<int>();
      else if (key == "exemplar_counts") c.exemplar_counts = value.get<std::vector<int>>();
      else if (key == "trials_per_exemplar") c.trials_per_exemplar = value.get<int>();
      else if (key == "n_subjects") c.n_subjects = value.get<int>();
      else if (key == "n_channels") c.n_channels = value.get<int>();
      else if (key == "n_samples") c.n_samples = value.get<int>();
      else if (key == "category_amplitude") c.category_amplitude = value.get<double>();
      else if (key == "exemplar_amplitude") c.exemplar_amplitude = value.get<double>();
      else if (key == "noise_sigma") c.noise_sigma = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error(ErrorCode::ConfigInvalid, fmt::format("unknown synth key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  // Changing n_categories on a preset invalidates its per-category counts.
  if (!c.exemplar_counts.empty() && static_cast<int>(c.exemplar_counts.size()) != c.n_categories &&
      !j.contains("exemplar_counts"))
    c.exemplar_counts.clear();
  return c;
}

}  // namespace exleak
