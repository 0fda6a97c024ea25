#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "exleak/dataset.hpp"

namespace exleak {

using ExemplarsByCategory = std::map<int, std::vector<int>>;

/// Balanced grouping of exemplars into semantically meaningless classes.
struct PseudocategoryAssignment {
  int n_pseudocategories = 0;
  std::map<int, int> exemplar_to_pseudo;
  /// pseudo id -> (true category id -> exemplar count)
  std::map<int, std::map<int, int>> per_pseudo_composition;
  double chance_accuracy = 0.0;

  /// Exemplar ids grouped by pseudocategory, each list ascending.
  std::vector<std::vector<int>> members() const;
};

/// Groups exemplar ids by the category their trials carry.
ExemplarsByCategory exemplars_by_category(const Dataset& dataset);

/// One exemplar from every category per pseudocategory; requires every
/// category to hold exactly P exemplars.
PseudocategoryAssignment assign_one_per_category(const ExemplarsByCategory& exemplars, int n_pseudocategories,
                                                 std::uint64_t seed);

/// composition[c] exemplars of category c per pseudocategory, chosen by a
/// seeded shuffle followed by chunking.
PseudocategoryAssignment assign_by_composition(const ExemplarsByCategory& exemplars, int n_pseudocategories,
                                               const std::map<int, int>& composition, std::uint64_t seed);

/// Replaces every trial's category id with its pseudocategory id.
Dataset relabel(const Dataset& dataset, const PseudocategoryAssignment& assignment);

nlohmann::json to_json(const PseudocategoryAssignment& assignment);

/// Accepts {"pseudocategories": [[exemplar ids], ...]}; the true-category
/// composition is reconstructed from `exemplar_category` (exemplar -> category).
PseudocategoryAssignment assignment_from_json(const nlohmann::json& j, const std::map<int, int>& exemplar_category);

}  // namespace exleak
