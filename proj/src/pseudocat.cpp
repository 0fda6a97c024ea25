#include "exleak/pseudocat.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak {

namespace {

constexpr std::uint64_t kAssignStream = 0x70736575;

void require_two_or_more(int p) {
  if (p < 2) throw Error(ErrorCode::ConfigInvalid, fmt::format("need at least 2 pseudocategories, got {}", p));
}

PseudocategoryAssignment finish(std::map<int, int> exemplar_to_pseudo, const std::map<int, int>& exemplar_category,
                                int p) {
  PseudocategoryAssignment a;
  a.n_pseudocategories = p;
  a.exemplar_to_pseudo = std::move(exemplar_to_pseudo);
  for (int q = 0; q < p; ++q) a.per_pseudo_composition[q];
  for (const auto& [exemplar, pseudo] : a.exemplar_to_pseudo) {
    const auto it = exemplar_category.find(exemplar);
    const int category = it == exemplar_category.end() ? -1 : it->second;
    ++a.per_pseudo_composition[pseudo][category];
  }
  a.chance_accuracy = 1.0 / p;
  return a;
}

std::map<int, int> invert(const ExemplarsByCategory& exemplars) {
  std::map<int, int> out;
  for (const auto& [category, list] : exemplars)
    for (int e : list) {
      if (!out.emplace(e, category).second)
        throw Error(ErrorCode::UnbalancedInput, fmt::format("exemplar {} listed under two categories", e));
    }
  return out;
}

}  // namespace

std::vector<std::vector<int>> PseudocategoryAssignment::members() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_pseudocategories));
  for (const auto& [exemplar, pseudo] : exemplar_to_pseudo) out.at(static_cast<std::size_t>(pseudo)).push_back(exemplar);
  return out;
}

ExemplarsByCategory exemplars_by_category(const Dataset& dataset) {
  std::map<int, std::set<int>> grouped;
  std::map<int, int> seen;
  for (const auto& t : dataset.trial_table()) {
    if (seen.emplace(t.exemplar_id, t.category_id).first->second == t.category_id)
      grouped[t.category_id].insert(t.exemplar_id);
  }
  ExemplarsByCategory out;
  for (const auto& [c, s] : grouped) out[c] = {s.begin(), s.end()};
  return out;
}

PseudocategoryAssignment assign_one_per_category(const ExemplarsByCategory& exemplars, int p, std::uint64_t seed) {
  require_two_or_more(p);
  for (const auto& [category, list] : exemplars) {
    if (static_cast<int>(list.size()) != p)
      throw Error(ErrorCode::UnbalancedInput,
                  fmt::format("category {} holds {} exemplars, expected {}", category, list.size(), p));
  }
  const auto categories = invert(exemplars);
  std::map<int, int> mapping;
  for (const auto& [category, list] : exemplars) {
    auto order = list;
    std::sort(order.begin(), order.end());
    CounterRng rng(derive_key(seed, {kAssignStream, static_cast<std::uint64_t>(category)}));
    shuffle(order, rng);
    for (int q = 0; q < p; ++q) mapping[order[static_cast<std::size_t>(q)]] = q;
  }
  return finish(std::move(mapping), categories, p);
}

PseudocategoryAssignment assign_by_composition(const ExemplarsByCategory& exemplars, int p,
                                               const std::map<int, int>& composition, std::uint64_t seed) {
  require_two_or_more(p);
  std::set<int> all_categories;
  for (const auto& [c, list] : exemplars) all_categories.insert(c);
  for (const auto& [c, n] : composition) all_categories.insert(c);
  for (int c : all_categories) {
    const auto it = exemplars.find(c);
    const std::size_t have = it == exemplars.end() ? 0 : it->second.size();
    const auto jt = composition.find(c);
    const int per = jt == composition.end() ? 0 : jt->second;
    if (per < 0 || have != static_cast<std::size_t>(per) * static_cast<std::size_t>(p))
      throw Error(ErrorCode::CompositionMismatch,
                  fmt::format("category {} holds {} exemplars but composition needs {} x {} = {}", c, have, per, p,
                              static_cast<long>(per) * p));
  }
  const auto categories = invert(exemplars);
  std::map<int, int> mapping;
  for (const auto& [category, list] : exemplars) {
    if (list.empty()) continue;
    auto order = list;
    std::sort(order.begin(), order.end());
    CounterRng rng(derive_key(seed, {kAssignStream, static_cast<std::uint64_t>(category)}));
    shuffle(order, rng);
    const auto per = static_cast<std::size_t>(composition.at(category));
    for (std::size_t i = 0; i < order.size(); ++i) mapping[order[i]] = static_cast<int>(i / per);
  }
  return finish(std::move(mapping), categories, p);
}

Dataset relabel(const Dataset& dataset, const PseudocategoryAssignment& a) {
  std::vector<TrialLabels> table(dataset.trial_table().begin(), dataset.trial_table().end());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto it = a.exemplar_to_pseudo.find(table[i].exemplar_id);
    if (it == a.exemplar_to_pseudo.end())
      throw Error(ErrorCode::UnmappedExemplar,
                  fmt::format("trial {} has exemplar {} with no pseudocategory", i, table[i].exemplar_id));
    table[i].category_id = it->second;
  }
  std::vector<std::string> names;
  for (int q = 0; q < a.n_pseudocategories; ++q) names.push_back(fmt::format("pseudo_{}", q));
  return dataset.with_trial_table(std::move(table), std::move(names));
}

nlohmann::json to_json(const PseudocategoryAssignment& a) {
  nlohmann::json composition = nlohmann::json::object();
  for (const auto& [pseudo, counts] : a.per_pseudo_composition) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [c, n] : counts) row[std::to_string(c)] = n;
    composition[std::to_string(pseudo)] = std::move(row);
  }
  return {
      {"n_pseudocategories", a.n_pseudocategories},
      {"pseudocategories", a.members()},
      {"composition", std::move(composition)},
      {"chance_accuracy", a.chance_accuracy},
  };
}

PseudocategoryAssignment assignment_from_json(const nlohmann::json& j, const std::map<int, int>& exemplar_category) {
  std::vector<std::vector<int>> groups;
  try {
    groups = j.at("pseudocategories").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("assignment: {}", e.what()));
  }
  const int p = static_cast<int>(groups.size());
  require_two_or_more(p);
  std::map<int, int> mapping;
  for (int q = 0; q < p; ++q)
    for (int e : groups[static_cast<std::size_t>(q)])
      if (!mapping.emplace(e, q).second)
        throw Error(ErrorCode::ConfigInvalid, fmt::format("assignment lists exemplar {} twice", e));
  auto a = finish(std::move(mapping), exemplar_category, p);
  // A loaded assignment must still satisfy exact balance.
  for (const auto& [q, counts] : a.per_pseudo_composition) {
    if (counts != a.per_pseudo_composition.begin()->second)
      throw Error(ErrorCode::UnbalancedInput, fmt::format("pseudocategory {} composition differs from pseudocategory 0", q));
  }
  return a;
}

}  // namespace exleak
