#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "exleak/classifiers.hpp"
#include "exleak/splits.hpp"
#include "exleak/stats.hpp"
#include "exleak/synth.hpp"

namespace exleak {

/// Where audit trials come from: a manifest on disk or a synthetic preset.
struct DatasetSource {
  std::string path;
  std::string preset;
  nlohmann::json overrides = nlohmann::json::object();  // SynthConfig keys

  bool is_synthetic() const noexcept { return path.empty(); }
  SynthConfig synth_config() const;
};

enum class AssignmentScheme { OnePerCategory, Composition, File };

struct AssignmentConfig {
  AssignmentScheme scheme = AssignmentScheme::OnePerCategory;
  int n_pseudocategories = 0;          // 0: inferred from the dataset
  std::map<int, int> composition;      // category -> exemplars per pseudocategory
  std::uint64_t seed = 0;
  std::string file;                    // used when scheme == File
};

struct NamedClassifier {
  std::string name;
  ClassifierSpec spec;
};

struct AuditConfig {
  DatasetSource dataset;
  AssignmentConfig assignment;
  std::vector<Protocol> protocols{Protocol::LeakyStratified, Protocol::CleanDisjoint};
  std::map<Protocol, int> k;
  std::vector<NamedClassifier> classifiers;
  double alpha = 0.05;
  int bonferroni_m = 0;  // 0: classifiers x protocols
  Alternative alternative = Alternative::Greater;
  std::uint64_t seed = 0;
  int bootstrap_resamples = 10000;
  std::vector<int> subjects;  // empty: every subject in the dataset

  int folds_for(Protocol p) const;
  int comparisons() const;
  bool runs(Protocol p) const;
};

void validate(const AuditConfig& cfg);

/// Parses the audit schema, filling defaults; throws ConfigInvalid.
AuditConfig audit_config_from_json(const nlohmann::json& j);
/// Full echo including every default.
nlohmann::json to_json(const AuditConfig& cfg);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Applies `dotted.key=value` to a JSON document; value is parsed as JSON
/// when possible, otherwise taken as a string. Numeric path components index
/// into arrays.
void apply_override(nlohmann::json& doc, std::string_view assignment);

std::string_view to_string(AssignmentScheme s) noexcept;

}  // namespace exleak
