#include "exleak/splits.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak {

namespace {

constexpr std::uint64_t kLeakyStream = 11;
constexpr std::uint64_t kCleanStream = 12;

void check_k(int k) {
  if (k < 2) throw Error(ErrorCode::InvalidK, fmt::format("k must be >= 2, got {}", k));
}

std::vector<std::size_t> all_indices(const Dataset& d) {
  std::vector<std::size_t> v(d.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

void check_range(const Dataset& d, std::span<const std::size_t> trials) {
  for (auto i : trials)
    if (i >= d.size()) throw Error(ErrorCode::IndexOutOfRange, fmt::format("trial index {} >= {}", i, d.size()));
}

// Content hash of a trial; orders trials of one exemplar independently of
// their position in the dataset.
std::uint64_t trial_fingerprint(const TrialView& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float v : t.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return mix64(h ^ static_cast<std::uint64_t>(t.labels.subject_id));
}

SplitPlan assemble(Protocol protocol, int k, std::uint64_t seed, std::span<const std::size_t> trials,
                   const std::vector<int>& fold_of) {
  SplitPlan plan{protocol, k, std::vector<Fold>(static_cast<std::size_t>(k)), seed};
  std::vector<std::pair<std::size_t, int>> sorted;
  sorted.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) sorted.emplace_back(trials[i], fold_of[i]);
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [index, fold] : sorted) {
    for (int f = 0; f < k; ++f) {
      auto& target = f == fold ? plan.folds[static_cast<std::size_t>(f)].test : plan.folds[static_cast<std::size_t>(f)].train;
      target.push_back(index);
    }
  }
  return plan;
}

}  // namespace

std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::LeakyStratified ? "leaky-stratified" : "clean-disjoint";
}

Protocol protocol_from_string(std::string_view name) {
  if (name == "leaky-stratified") return Protocol::LeakyStratified;
  if (name == "clean-disjoint") return Protocol::CleanDisjoint;
  throw Error(ErrorCode::ConfigInvalid, fmt::format("unknown protocol '{}'", name));
}

SplitPlan stratified_kfold_by_exemplar(const Dataset& d, int k, std::uint64_t seed) {
  const auto all = all_indices(d);
  return stratified_kfold_by_exemplar(d, all, k, seed);
}

SplitPlan stratified_kfold_by_exemplar(const Dataset& d, std::span<const std::size_t> trials, int k,
                                       std::uint64_t seed) {
  check_k(k);
  check_range(d, trials);
  std::map<int, std::vector<std::size_t>> by_exemplar;  // exemplar -> positions in `trials`
  for (std::size_t i = 0; i < trials.size(); ++i) by_exemplar[d.labels(trials[i]).exemplar_id].push_back(i);

  std::vector<int> fold_of(trials.size(), 0);
  // The round-robin start carries over between exemplars so remainders
  // spread evenly across folds instead of piling onto fold 0.
  std::size_t start = 0;
  for (auto& [exemplar, positions] : by_exemplar) {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(positions.size());
    for (auto p : positions) keyed.emplace_back(trial_fingerprint(d.trial(trials[p])), p);
    std::sort(keyed.begin(), keyed.end());
    CounterRng rng(derive_key(seed, {kLeakyStream, static_cast<std::uint64_t>(exemplar)}));
    shuffle(keyed, rng);
    for (std::size_t r = 0; r < keyed.size(); ++r)
      fold_of[keyed[r].second] = static_cast<int>((start + r) % static_cast<std::size_t>(k));
    start = (start + keyed.size()) % static_cast<std::size_t>(k);
  }
  return assemble(Protocol::LeakyStratified, k, seed, trials, fold_of);
}

SplitPlan exemplar_disjoint_kfold(const Dataset& d, int k, std::uint64_t seed) {
  const auto all = all_indices(d);
  return exemplar_disjoint_kfold(d, all, k, seed);
}

SplitPlan exemplar_disjoint_kfold(const Dataset& d, std::span<const std::size_t> trials, int k, std::uint64_t seed) {
  check_k(k);
  check_range(d, trials);
  std::map<int, int> category_of;
  for (auto i : trials) category_of.emplace(d.labels(i).exemplar_id, d.labels(i).category_id);
  if (category_of.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::TooFewExemplars, fmt::format("{} exemplars cannot fill {} folds", category_of.size(), k));

  std::map<int, std::vector<int>> by_category;
  for (const auto& [e, c] : category_of) by_category[c].push_back(e);

  // Seeded fold order decides which folds take the remainder when a
  // category's exemplar count does not divide by k.
  std::vector<int> fold_order(static_cast<std::size_t>(k));
  std::iota(fold_order.begin(), fold_order.end(), 0);
  CounterRng order_rng(derive_key(seed, {kCleanStream, ~std::uint64_t{0}}));
  shuffle(fold_order, order_rng);

  std::map<int, int> fold_of_exemplar;
  std::size_t start = 0;
  for (auto& [category, exemplars] : by_category) {
    CounterRng rng(derive_key(seed, {kCleanStream, static_cast<std::uint64_t>(category)}));
    shuffle(exemplars, rng);
    for (std::size_t r = 0; r < exemplars.size(); ++r)
      fold_of_exemplar[exemplars[r]] = fold_order[(start + r) % static_cast<std::size_t>(k)];
    start = (start + exemplars.size()) % static_cast<std::size_t>(k);
  }
  std::vector<int> fold_of(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) fold_of[i] = fold_of_exemplar.at(d.labels(trials[i]).exemplar_id);
  return assemble(Protocol::CleanDisjoint, k, seed, trials, fold_of);
}

SplitValidationReport validate_split(const SplitPlan& plan, const Dataset& d) {
  SplitValidationReport r;
  r.fold_count_matches = plan.k == static_cast<int>(plan.folds.size()) && plan.k >= 1;
  for (const auto& f : plan.folds) {
    for (auto i : f.train)
      if (i >= d.size()) throw Error(ErrorCode::IndexOutOfRange, fmt::format("train index {} >= {}", i, d.size()));
    for (auto i : f.test)
      if (i >= d.size()) throw Error(ErrorCode::IndexOutOfRange, fmt::format("test index {} >= {}", i, d.size()));
  }
  if (plan.folds.empty()) return r;

  std::set<std::size_t> universe(plan.folds.front().train.begin(), plan.folds.front().train.end());
  universe.insert(plan.folds.front().test.begin(), plan.folds.front().test.end());

  r.disjoint = true;
  r.partitions = true;
  std::set<std::size_t> tested;
  std::size_t tested_total = 0;
  for (const auto& f : plan.folds) {
    const std::set<std::size_t> train(f.train.begin(), f.train.end());
    const std::set<std::size_t> test(f.test.begin(), f.test.end());
    FoldDiagnostics diag;
    std::set<int> train_exemplars;
    std::set<int> test_exemplars;
    for (auto i : train) {
      train_exemplars.insert(d.labels(i).exemplar_id);
      ++diag.train_label_histogram[d.labels(i).category_id];
      if (test.contains(i)) r.disjoint = false;
    }
    for (auto i : test) {
      test_exemplars.insert(d.labels(i).exemplar_id);
      ++diag.test_label_histogram[d.labels(i).category_id];
    }
    for (int e : test_exemplars) diag.leak_count += train_exemplars.contains(e) ? 1 : 0;
    std::set<std::size_t> both = train;
    both.insert(test.begin(), test.end());
    if (both != universe) r.partitions = false;
    tested_total += test.size();
    tested.insert(test.begin(), test.end());
    r.folds.push_back(std::move(diag));
  }
  if (tested.size() != tested_total) r.partitions = false;
  r.covers = tested == universe;
  return r;
}

nlohmann::json to_json(const SplitPlan& plan) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : plan.folds) folds.push_back({{"train", f.train}, {"test", f.test}});
  return {{"protocol", to_string(plan.protocol)}, {"k", plan.k}, {"seed", plan.seed}, {"folds", std::move(folds)}};
}

SplitPlan split_plan_from_json(const nlohmann::json& j) {
  try {
    SplitPlan plan;
    plan.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    plan.k = j.at("k").get<int>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds"))
      plan.folds.push_back({f.at("train").get<std::vector<std::size_t>>(), f.at("test").get<std::vector<std::size_t>>()});
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("split plan: {}", e.what()));
  }
}

nlohmann::json to_json(const SplitValidationReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json train = nlohmann::json::object();
    nlohmann::json test = nlohmann::json::object();
    for (const auto& [label, n] : f.train_label_histogram) train[std::to_string(label)] = n;
    for (const auto& [label, n] : f.test_label_histogram) test[std::to_string(label)] = n;
    folds.push_back({{"leak_count", f.leak_count}, {"train_labels", train}, {"test_labels", test}});
  }
  return {{"covers", r.covers},       {"partitions", r.partitions}, {"disjoint", r.disjoint},
          {"fold_count_matches", r.fold_count_matches}, {"valid", r.valid()}, {"folds", std::move(folds)}};
}

}  // namespace exleak
