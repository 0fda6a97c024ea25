#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "exleak/dataset.hpp"

namespace exleak {

enum class Protocol { LeakyStratified, CleanDisjoint };

std::string_view to_string(Protocol p) noexcept;
Protocol protocol_from_string(std::string_view name);

struct Fold {
  std::vector<std::size_t> train;  // ascending trial indices
  std::vector<std::size_t> test;   // ascending trial indices
};

struct SplitPlan {
  Protocol protocol = Protocol::LeakyStratified;
  int k = 0;
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
};

/// k-fold plan stratified on exemplar id: every exemplar's trials are spread
/// across all test folds with per-fold counts differing by at most one, so
/// each exemplar sits on both sides of each fold.
SplitPlan stratified_kfold_by_exemplar(const Dataset& d, int k, std::uint64_t seed);
SplitPlan stratified_kfold_by_exemplar(const Dataset& d, std::span<const std::size_t> trials, int k,
                                       std::uint64_t seed);

/// k-fold plan over exemplars: a fold's test set is every trial of its
/// exemplars, so no exemplar spans train and test. Exemplars are dealt per
/// true category so categories stay balanced across folds.
SplitPlan exemplar_disjoint_kfold(const Dataset& d, int k, std::uint64_t seed);
SplitPlan exemplar_disjoint_kfold(const Dataset& d, std::span<const std::size_t> trials, int k, std::uint64_t seed);

struct FoldDiagnostics {
  std::size_t leak_count = 0;  // exemplars present in both train and test
  std::map<int, std::size_t> train_label_histogram;
  std::map<int, std::size_t> test_label_histogram;
};

struct SplitValidationReport {
  bool covers = false;        // union of test sets equals the plan's trial universe
  bool partitions = false;    // test sets are pairwise disjoint
  bool disjoint = false;      // train and test disjoint within every fold
  bool fold_count_matches = false;
  std::vector<FoldDiagnostics> folds;

  bool valid() const noexcept { return covers && partitions && disjoint && fold_count_matches; }
};

SplitValidationReport validate_split(const SplitPlan& plan, const Dataset& d);

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitValidationReport& report);

}  // namespace exleak
