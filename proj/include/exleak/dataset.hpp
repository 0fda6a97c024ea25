#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace exleak {

struct TrialLabels {
  int exemplar_id = 0;
  int category_id = 0;
  int subject_id = 0;

  friend bool operator==(const TrialLabels&, const TrialLabels&) = default;
};

struct DatasetManifest {
  std::int64_t n_trials = 0;
  std::int64_t n_channels = 1;
  std::int64_t n_samples = 1;
  std::vector<std::string> exemplar_names;
  std::vector<std::string> category_names;
  std::vector<int> subject_ids;
  std::string data_file = "data.f32";
  int format_version = 1;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Non-owning view of one trial: a channels x samples matrix stored
/// channel-major, plus its labels.
struct TrialView {
  std::span<const float> data;
  int channels = 0;
  int samples = 0;
  TrialLabels labels;

  float at(int channel, int sample) const { return data[static_cast<std::size_t>(channel) * samples + sample]; }
};

/// Owning trial matrix, used when building datasets from code.
struct Trial {
  int channels = 0;
  int samples = 0;
  std::vector<float> data;  // channel-major, size channels * samples
  TrialLabels labels;

  TrialView view() const { return {data, channels, samples, labels}; }
};

/// Immutable collection of equally shaped trials. Copies share the payload.
class Dataset {
 public:
  Dataset() = default;

  /// Validates shape, finiteness and label ranges; throws exleak::Error.
  Dataset(DatasetManifest manifest, std::vector<float> payload, std::vector<TrialLabels> trial_table);

  static Dataset from_trials(std::span<const Trial> trials, std::vector<std::string> exemplar_names,
                             std::vector<std::string> category_names);

  std::size_t size() const noexcept { return table_.size(); }
  bool empty() const noexcept { return table_.empty(); }
  int channels() const noexcept { return static_cast<int>(manifest_.n_channels); }
  int samples() const noexcept { return static_cast<int>(manifest_.n_samples); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(channels()) * samples(); }

  TrialView trial(std::size_t index) const;
  const TrialLabels& labels(std::size_t index) const { return table_.at(index); }
  std::span<const TrialLabels> trial_table() const noexcept { return table_; }
  std::span<const float> payload() const noexcept;
  const DatasetManifest& manifest() const noexcept { return manifest_; }

  /// Same payload and shape with a replacement trial table (used by relabel).
  Dataset with_trial_table(std::vector<TrialLabels> table, std::vector<std::string> category_names) const;

  /// Indices of every trial recorded for `subject`, ascending.
  std::vector<std::size_t> trials_of_subject(int subject) const;

  /// Distinct subject ids that occur in the trial table, ascending.
  std::vector<int> present_subjects() const;

  /// Element-wise equality of manifest, labels and payload bits.
  bool identical_to(const Dataset& other) const;

 private:
  DatasetManifest manifest_;
  std::shared_ptr<const std::vector<float>> payload_;
  std::vector<TrialLabels> table_;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `manifest.json` plus the payload file into `directory`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

struct ValidationReport {
  std::map<int, std::size_t> trials_per_exemplar;
  std::map<int, std::size_t> exemplars_per_category;
  std::map<int, std::size_t> trials_per_subject;
  /// exemplar id -> the distinct category ids its trials carry (only when > 1)
  std::map<int, std::vector<int>> inconsistent_exemplars;

  bool has_flags() const noexcept { return !inconsistent_exemplars.empty(); }
};

ValidationReport validate_dataset(const Dataset& dataset);

nlohmann::json to_json(const ValidationReport& report);
nlohmann::json manifest_to_json(const DatasetManifest& manifest, std::span<const TrialLabels> table);

std::vector<float> flatten_trial(const TrialView& trial);
Trial unflatten_trial(std::span<const float> features, int channels, int samples);

}  // namespace exleak
