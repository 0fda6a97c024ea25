#include "exleak/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "exleak/error.hpp"

namespace exleak {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v & 0xFF0000u) >> 8) | (v >> 24);
}

void to_little_endian(std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) v = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(v)));
  }
}

template <typename T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::MalformedManifest, fmt::format("missing field '{}'", key));
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, fmt::format("field '{}': {}", key, e.what()));
  }
}

}  // namespace

Dataset::Dataset(DatasetManifest manifest, std::vector<float> payload, std::vector<TrialLabels> trial_table)
    : manifest_(std::move(manifest)), table_(std::move(trial_table)) {
  if (manifest_.n_channels < 1 || manifest_.n_samples < 1 || manifest_.n_trials < 0)
    throw Error(ErrorCode::MalformedManifest, "n_channels and n_samples must be >= 1, n_trials >= 0");
  if (static_cast<std::int64_t>(table_.size()) != manifest_.n_trials)
    throw Error(ErrorCode::MalformedManifest,
                fmt::format("trial_table has {} rows, n_trials is {}", table_.size(), manifest_.n_trials));
  const auto expected = static_cast<std::size_t>(manifest_.n_trials * manifest_.n_channels * manifest_.n_samples);
  if (payload.size() != expected)
    throw Error(ErrorCode::PayloadSizeMismatch,
                fmt::format("payload holds {} values, expected {}", payload.size(), expected));
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (!std::isfinite(payload[i]))
      throw Error(ErrorCode::NonFiniteValue, fmt::format("payload element {} is not finite", i));
  }
  const std::set<int> subjects(manifest_.subject_ids.begin(), manifest_.subject_ids.end());
  for (std::size_t i = 0; i < table_.size(); ++i) {
    const auto& t = table_[i];
    if (t.exemplar_id < 0 || t.exemplar_id >= static_cast<int>(manifest_.exemplar_names.size()))
      throw Error(ErrorCode::MalformedManifest, fmt::format("trial {}: exemplar_id {} out of range", i, t.exemplar_id));
    if (t.category_id < 0 || t.category_id >= static_cast<int>(manifest_.category_names.size()))
      throw Error(ErrorCode::MalformedManifest, fmt::format("trial {}: category_id {} out of range", i, t.category_id));
    if (!subjects.contains(t.subject_id))
      throw Error(ErrorCode::MalformedManifest, fmt::format("trial {}: subject_id {} not listed", i, t.subject_id));
  }
  payload_ = std::make_shared<const std::vector<float>>(std::move(payload));
}

Dataset Dataset::from_trials(std::span<const Trial> trials, std::vector<std::string> exemplar_names,
                             std::vector<std::string> category_names) {
  DatasetManifest m;
  m.n_trials = static_cast<std::int64_t>(trials.size());
  m.exemplar_names = std::move(exemplar_names);
  m.category_names = std::move(category_names);
  if (!trials.empty()) {
    m.n_channels = trials.front().channels;
    m.n_samples = trials.front().samples;
  }
  std::vector<float> payload;
  std::vector<TrialLabels> table;
  std::set<int> subjects;
  payload.reserve(trials.size() * static_cast<std::size_t>(m.n_channels * m.n_samples));
  for (const auto& t : trials) {
    if (t.channels != m.n_channels || t.samples != m.n_samples ||
        t.data.size() != static_cast<std::size_t>(t.channels) * t.samples)
      throw Error(ErrorCode::ShapeMismatch, "trials must share one channels x samples shape");
    payload.insert(payload.end(), t.data.begin(), t.data.end());
    table.push_back(t.labels);
    subjects.insert(t.labels.subject_id);
  }
  m.subject_ids.assign(subjects.begin(), subjects.end());
  return Dataset(std::move(m), std::move(payload), std::move(table));
}

std::span<const float> Dataset::payload() const noexcept {
  if (!payload_) return {};
  return *payload_;
}

TrialView Dataset::trial(std::size_t index) const {
  if (index >= table_.size())
    throw Error(ErrorCode::IndexOutOfRange, fmt::format("trial {} of {}", index, table_.size()));
  const auto dim = feature_dim();
  return {payload().subspan(index * dim, dim), channels(), samples(), table_[index]};
}

Dataset Dataset::with_trial_table(std::vector<TrialLabels> table, std::vector<std::string> category_names) const {
  Dataset out;
  out.manifest_ = manifest_;
  out.manifest_.category_names = std::move(category_names);
  if (table.size() != table_.size()) throw Error(ErrorCode::LengthMismatch, "replacement trial table size differs");
  for (const auto& t : table) {
    if (t.category_id < 0 || t.category_id >= static_cast<int>(out.manifest_.category_names.size()))
      throw Error(ErrorCode::MalformedManifest, "replacement category id out of range");
  }
  out.payload_ = payload_;
  out.table_ = std::move(table);
  return out;
}

std::vector<std::size_t> Dataset::trials_of_subject(int subject) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < table_.size(); ++i)
    if (table_[i].subject_id == subject) out.push_back(i);
  return out;
}

std::vector<int> Dataset::present_subjects() const {
  std::set<int> s;
  for (const auto& t : table_) s.insert(t.subject_id);
  return {s.begin(), s.end()};
}

bool Dataset::identical_to(const Dataset& other) const {
  if (!(manifest_ == other.manifest_) || table_ != other.table_) return false;
  const auto a = payload();
  const auto b = other.payload();
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

nlohmann::json manifest_to_json(const DatasetManifest& m, std::span<const TrialLabels> table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : table) rows.push_back({t.exemplar_id, t.category_id, t.subject_id});
  return {
      {"n_trials", m.n_trials},
      {"n_channels", m.n_channels},
      {"n_samples", m.n_samples},
      {"exemplar_names", m.exemplar_names},
      {"category_names", m.category_names},
      {"subject_ids", m.subject_ids},
      {"data_file", m.data_file},
      {"format_version", m.format_version},
      {"trial_table", std::move(rows)},
  };
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingFile, manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedManifest, "manifest must be a JSON object");

  DatasetManifest m;
  m.n_trials = required<std::int64_t>(j, "n_trials");
  m.n_channels = required<std::int64_t>(j, "n_channels");
  m.n_samples = required<std::int64_t>(j, "n_samples");
  m.exemplar_names = required<std::vector<std::string>>(j, "exemplar_names");
  m.category_names = required<std::vector<std::string>>(j, "category_names");
  m.subject_ids = required<std::vector<int>>(j, "subject_ids");
  m.data_file = required<std::string>(j, "data_file");
  m.format_version = required<int>(j, "format_version");
  if (m.format_version != 1)
    throw Error(ErrorCode::MalformedManifest, fmt::format("unsupported format_version {}", m.format_version));

  const auto rows = required<std::vector<std::array<int, 3>>>(j, "trial_table");
  std::vector<TrialLabels> table;
  table.reserve(rows.size());
  for (const auto& r : rows) table.push_back({r[0], r[1], r[2]});
  if (m.n_channels < 1 || m.n_samples < 1 || m.n_trials < 0)
    throw Error(ErrorCode::MalformedManifest, "n_channels and n_samples must be >= 1, n_trials >= 0");

  const auto data_path = manifest_path.parent_path() / m.data_file;
  std::ifstream bin(data_path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::MissingFile, data_path.string());
  bin.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  bin.seekg(0, std::ios::beg);
  if (bytes % sizeof(float) != 0)
    throw Error(ErrorCode::PayloadSizeMismatch, fmt::format("payload size {} bytes is not a multiple of 4", bytes));
  const auto expected = static_cast<std::size_t>(m.n_trials * m.n_channels * m.n_samples);
  if (bytes / sizeof(float) != expected)
    throw Error(ErrorCode::PayloadSizeMismatch,
                fmt::format("payload holds {} values, expected {}", bytes / sizeof(float), expected));
  std::vector<float> payload(expected);
  if (expected > 0 && !bin.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes)))
    throw Error(ErrorCode::IoError, fmt::format("short read on {}", data_path.string()));
  to_little_endian(payload);  // involution: converts LE on disk to native
  return Dataset(std::move(m), std::move(payload), std::move(table));
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("cannot create {}: {}", directory.string(), ec.message()));

  const auto& m = dataset.manifest();
  const auto manifest_path = directory / "manifest.json";
  {
    std::ofstream out(manifest_path);
    if (!out) throw Error(ErrorCode::IoError, manifest_path.string());
    out << manifest_to_json(m, dataset.trial_table()).dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoError, manifest_path.string());
  }
  const auto data_path = directory / m.data_file;
  std::ofstream bin(data_path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::IoError, data_path.string());
  std::vector<float> le(dataset.payload().begin(), dataset.payload().end());
  to_little_endian(le);
  bin.write(reinterpret_cast<const char*>(le.data()), static_cast<std::streamsize>(le.size() * sizeof(float)));
  if (!bin) throw Error(ErrorCode::IoError, data_path.string());
  return manifest_path;
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport r;
  std::map<int, std::set<int>> categories_of_exemplar;
  for (const auto& t : dataset.trial_table()) {
    ++r.trials_per_exemplar[t.exemplar_id];
    ++r.trials_per_subject[t.subject_id];
    categories_of_exemplar[t.exemplar_id].insert(t.category_id);
  }
  for (const auto& [exemplar, cats] : categories_of_exemplar) {
    if (cats.size() > 1) r.inconsistent_exemplars[exemplar] = {cats.begin(), cats.end()};
    // Inconsistent exemplars are counted under their first category.
    ++r.exemplars_per_category[*cats.begin()];
  }
  return r;
}

nlohmann::json to_json(const ValidationReport& r) {
  auto keyed = [](const auto& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
  };
  return {
      {"trials_per_exemplar", keyed(r.trials_per_exemplar)},
      {"exemplars_per_category", keyed(r.exemplars_per_category)},
      {"trials_per_subject", keyed(r.trials_per_subject)},
      {"inconsistent_exemplars", keyed(r.inconsistent_exemplars)},
  };
}

std::vector<float> flatten_trial(const TrialView& trial) {
  // Storage is already channel-major: v[c*T + s] = data[c][s].
  return {trial.data.begin(), trial.data.end()};
}

Trial unflatten_trial(std::span<const float> features, int channels, int samples) {
  if (channels < 1 || samples < 1 || features.size() != static_cast<std::size_t>(channels) * samples)
    throw Error(ErrorCode::ShapeMismatch, "feature length does not match channels x samples");
  return {channels, samples, {features.begin(), features.end()}, {}};
}

}  // namespace exleak
