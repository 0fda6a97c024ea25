#include "exleak/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "exleak/error.hpp"

namespace exleak {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, std::string_view where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) invalid(fmt::format("unknown key '{}' in {}", key, where));
}

int default_folds(const DatasetSource& src) {
  if (src.preset == "kaneshiro-like") return 12;
  return 10;
}

}  // namespace

SynthConfig DatasetSource::synth_config() const {
  return synth_config_from_json(overrides, preset.empty() ? SynthConfig{} : exleak::preset(preset));
}

int AuditConfig::folds_for(Protocol p) const {
  const auto it = k.find(p);
  return it == k.end() ? 10 : it->second;
}

int AuditConfig::comparisons() const {
  return bonferroni_m > 0 ? bonferroni_m : static_cast<int>(classifiers.size() * protocols.size());
}

bool AuditConfig::runs(Protocol p) const { return std::find(protocols.begin(), protocols.end(), p) != protocols.end(); }

std::string_view to_string(AssignmentScheme s) noexcept {
  switch (s) {
    case AssignmentScheme::OnePerCategory: return "one-per-category";
    case AssignmentScheme::Composition: return "composition";
    case AssignmentScheme::File: return "file";
  }
  return "?";
}

void validate(const AuditConfig& cfg) {
  if (cfg.protocols.empty()) invalid("at least one protocol is required");
  if (cfg.classifiers.empty()) invalid("at least one classifier is required");
  for (auto p : cfg.protocols) {
    const int k = cfg.folds_for(p);
    if (k < 2) throw Error(ErrorCode::InvalidK, fmt::format("k for {} must be >= 2, got {}", to_string(p), k));
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) invalid("alpha must be in (0, 1)");
  if (cfg.bonferroni_m < 0) invalid("bonferroni_m must be >= 0");
  if (cfg.bootstrap_resamples < 1) invalid("bootstrap_resamples must be >= 1");
  if (cfg.dataset.path.empty() && cfg.dataset.preset.empty()) invalid("dataset needs a path or a preset");
  if (cfg.assignment.scheme == AssignmentScheme::File && cfg.assignment.file.empty())
    invalid("assignment scheme 'file' needs a file");
  if (cfg.assignment.n_pseudocategories == 1) invalid("n_pseudocategories must be >= 2");
  std::set<std::string> names;
  for (const auto& c : cfg.classifiers) {
    validate(c.spec);
    if (!names.insert(c.name).second) invalid(fmt::format("duplicate classifier name '{}'", c.name));
  }
}

AuditConfig audit_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) invalid("audit config must be a JSON object");
  reject_unknown(j,
                 {"dataset", "assignment", "protocols", "k", "classifiers", "alpha", "bonferroni_m", "alternative",
                  "seed", "bootstrap_resamples", "subjects"},
                 "audit config");
  AuditConfig cfg;
  try {
    if (!j.contains("dataset")) invalid("missing 'dataset'");
    const auto& ds = j.at("dataset");
    reject_unknown(ds, {"path", "preset", "overrides"}, "dataset");
    cfg.dataset.path = ds.value("path", std::string{});
    cfg.dataset.preset = ds.value("preset", std::string{});
    if (ds.contains("overrides")) cfg.dataset.overrides = ds.at("overrides");
    if (!cfg.dataset.path.empty() && !cfg.dataset.preset.empty()) invalid("dataset takes a path or a preset, not both");
    if (!cfg.dataset.preset.empty()) (void)cfg.dataset.synth_config();  // surfaces UnknownPreset early

    const bool gifford = cfg.dataset.preset == "gifford-like";
    if (gifford) {
      cfg.assignment.scheme = AssignmentScheme::Composition;
      cfg.assignment.n_pseudocategories = 5;
      const auto& comp = gifford_composition();
      for (std::size_t c = 0; c < comp.size(); ++c) cfg.assignment.composition[static_cast<int>(c)] = comp[c];
    }
    if (j.contains("assignment")) {
      const auto& a = j.at("assignment");
      reject_unknown(a, {"scheme", "n_pseudocategories", "composition", "seed", "file"}, "assignment");
      if (a.contains("scheme")) {
        const auto s = a.at("scheme").get<std::string>();
        if (s == "one-per-category") cfg.assignment.scheme = AssignmentScheme::OnePerCategory;
        else if (s == "composition") cfg.assignment.scheme = AssignmentScheme::Composition;
        else if (s == "file") cfg.assignment.scheme = AssignmentScheme::File;
        else invalid(fmt::format("unknown assignment scheme '{}'", s));
      }
      cfg.assignment.n_pseudocategories = a.value("n_pseudocategories", cfg.assignment.n_pseudocategories);
      cfg.assignment.seed = a.value("seed", cfg.assignment.seed);
      cfg.assignment.file = a.value("file", cfg.assignment.file);
      if (a.contains("composition")) {
        cfg.assignment.composition.clear();
        const auto& comp = a.at("composition");
        if (comp.is_array()) {
          for (std::size_t c = 0; c < comp.size(); ++c) cfg.assignment.composition[static_cast<int>(c)] = comp[c].get<int>();
        } else if (comp.is_object()) {
          for (const auto& [key, value] : comp.items()) cfg.assignment.composition[std::stoi(key)] = value.get<int>();
        } else {
          invalid("assignment.composition must be an array or an object");
        }
      }
      if (!cfg.assignment.file.empty() && !a.contains("scheme")) cfg.assignment.scheme = AssignmentScheme::File;
    }

    if (j.contains("protocols")) {
      cfg.protocols.clear();
      for (const auto& p : j.at("protocols")) {
        const auto proto = protocol_from_string(p.get<std::string>());
        if (!cfg.runs(proto)) cfg.protocols.push_back(proto);
      }
    }
    const int default_k = default_folds(cfg.dataset);
    for (auto p : {Protocol::LeakyStratified, Protocol::CleanDisjoint}) cfg.k[p] = default_k;
    if (j.contains("k")) {
      const auto& k = j.at("k");
      if (k.is_number_integer()) {
        for (auto& [p, v] : cfg.k) v = k.get<int>();
      } else if (k.is_object()) {
        for (const auto& [key, value] : k.items()) cfg.k[protocol_from_string(key)] = value.get<int>();
      } else {
        invalid("'k' must be an integer or an object keyed by protocol");
      }
    }

    if (j.contains("classifiers")) {
      std::map<std::string, int> seen;
      for (const auto& c : j.at("classifiers")) {
        nlohmann::json body = c.is_string() ? nlohmann::json{{"kind", c}} : c;
        std::string name;
        if (body.is_object() && body.contains("name")) {
          name = body.at("name").get<std::string>();
          body.erase("name");
        }
        auto spec = classifier_spec_from_json(body);
        if (name.empty()) {
          const std::string kind(kind_name(spec));
          const int n = ++seen[kind];
          name = n == 1 ? kind : fmt::format("{}_{}", kind, n);
        }
        cfg.classifiers.push_back({name, spec});
      }
    } else {
      cfg.classifiers = {{"knn", KnnSpec{}}, {"lda", LdaSpec{}}, {"svm", SvmSpec{}}, {"shallowconv", ShallowConvSpec{}}};
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.bonferroni_m = j.value("bonferroni_m", cfg.bonferroni_m);
    if (j.contains("alternative")) cfg.alternative = alternative_from_string(j.at("alternative").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.bootstrap_resamples = j.value("bootstrap_resamples", cfg.bootstrap_resamples);
    if (j.contains("subjects")) cfg.subjects = j.at("subjects").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    invalid(e.what());
  }
  validate(cfg);
  return cfg;
}

nlohmann::json to_json(const AuditConfig& cfg) {
  nlohmann::json dataset = nlohmann::json::object();
  if (!cfg.dataset.path.empty()) dataset["path"] = cfg.dataset.path;
  if (!cfg.dataset.preset.empty()) {
    dataset["preset"] = cfg.dataset.preset;
    dataset["overrides"] = cfg.dataset.overrides;
    dataset["resolved"] = to_json(cfg.dataset.synth_config());
  }
  nlohmann::json composition = nlohmann::json::object();
  for (const auto& [c, n] : cfg.assignment.composition) composition[std::to_string(c)] = n;
  nlohmann::json assignment{{"scheme", to_string(cfg.assignment.scheme)},
                            {"n_pseudocategories", cfg.assignment.n_pseudocategories},
                            {"composition", composition},
                            {"seed", cfg.assignment.seed}};
  if (!cfg.assignment.file.empty()) assignment["file"] = cfg.assignment.file;
  nlohmann::json protocols = nlohmann::json::array();
  nlohmann::json k = nlohmann::json::object();
  for (auto p : cfg.protocols) {
    protocols.push_back(to_string(p));
    k[std::string(to_string(p))] = cfg.folds_for(p);
  }
  nlohmann::json classifiers = nlohmann::json::array();
  for (const auto& c : cfg.classifiers) {
    auto spec = to_json(c.spec);
    spec["name"] = c.name;
    classifiers.push_back(std::move(spec));
  }
  return {{"dataset", std::move(dataset)},
          {"assignment", std::move(assignment)},
          {"protocols", std::move(protocols)},
          {"k", std::move(k)},
          {"classifiers", std::move(classifiers)},
          {"alpha", cfg.alpha},
          {"bonferroni_m", cfg.comparisons()},
          {"alternative", to_string(cfg.alternative)},
          {"seed", cfg.seed},
          {"bootstrap_resamples", cfg.bootstrap_resamples},
          {"subjects", cfg.subjects}};
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    invalid(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) invalid(fmt::format("override '{}' is not key=value", assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) invalid(fmt::format("override key '{}' has an empty component", key));
    const bool numeric = std::all_of(part.begin(), part.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
    nlohmann::json* next = nullptr;
    if (node->is_array() && numeric) {
      const auto idx = std::stoul(part);
      if (idx >= node->size()) invalid(fmt::format("override index {} out of range in '{}'", idx, key));
      next = &(*node)[idx];
    } else {
      if (node->is_null()) *node = nlohmann::json::object();
      if (!node->is_object()) invalid(fmt::format("override '{}' descends into a non-object", key));
      next = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *next = std::move(value);
      return;
    }
    node = next;
    start = dot + 1;
  }
}

}  // namespace exleak
