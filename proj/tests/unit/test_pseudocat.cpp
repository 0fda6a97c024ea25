#include <doctest.h>

#include <set>

#include "exleak/error.hpp"
#include "exleak/pseudocat.hpp"
#include "exleak/rng.hpp"
#include "exleak/synth.hpp"
#include "helpers.hpp"

using namespace exleak;

namespace {

ExemplarsByCategory grid(int categories, int per_category) {
  ExemplarsByCategory out;
  int id = 0;
  for (int c = 0; c < categories; ++c)
    for (int j = 0; j < per_category; ++j) out[c].push_back(id++);
  return out;
}

ExemplarsByCategory gifford_grid() {
  ExemplarsByCategory out;
  int id = 0;
  const auto& comp = gifford_composition();
  for (std::size_t c = 0; c < comp.size(); ++c)
    for (int j = 0; j < comp[c] * 5; ++j) out[static_cast<int>(c)].push_back(id++);
  return out;
}

std::map<int, int> gifford_map() {
  std::map<int, int> m;
  const auto& comp = gifford_composition();
  for (std::size_t c = 0; c < comp.size(); ++c) m[static_cast<int>(c)] = comp[c];
  return m;
}

// max over (p, c) of |count(p, c) - count(0, c)|
int balance_error(const PseudocategoryAssignment& a) {
  int worst = 0;
  const auto& first = a.per_pseudo_composition.at(0);
  for (const auto& [p, counts] : a.per_pseudo_composition) {
    std::set<int> cats;
    for (const auto& [c, n] : counts) cats.insert(c);
    for (const auto& [c, n] : first) cats.insert(c);
    for (int c : cats) {
      const int x = counts.contains(c) ? counts.at(c) : 0;
      const int y = first.contains(c) ? first.at(c) : 0;
      worst = std::max(worst, std::abs(x - y));
    }
  }
  return worst;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected exleak::Error");
  return ErrorCode::EmptyInput;
}

}  // namespace

TEST_SUITE("pseudocat") {
  TEST_CASE("one per category: 6 x 12, P = 12") {
    const auto a = assign_one_per_category(grid(6, 12), 12, 7);
    CHECK(a.n_pseudocategories == 12);
    CHECK(a.chance_accuracy == 1.0 / 12.0);
    const auto members = a.members();
    REQUIRE(members.size() == 12);
    for (const auto& m : members) CHECK(m.size() == 6);
    for (const auto& [p, counts] : a.per_pseudo_composition) {
      CHECK(counts.size() == 6);
      for (const auto& [c, n] : counts) CHECK(n == 1);
    }
    CHECK(balance_error(a) == 0);
    CHECK(a.exemplar_to_pseudo.size() == 72);
  }

  TEST_CASE("one per category: degenerate single category") {
    for (int p : {2, 3, 7}) {
      const auto a = assign_one_per_category(grid(1, p), p, 1);
      for (const auto& m : a.members()) CHECK(m.size() == 1);
    }
  }

  TEST_CASE("one per category: unbalanced input and P < 2") {
    CHECK(code_of([] { assign_one_per_category(grid(6, 11), 12, 0); }) == ErrorCode::UnbalancedInput);
    CHECK(code_of([] { assign_one_per_category(grid(1, 1), 1, 0); }) == ErrorCode::ConfigInvalid);
  }

  TEST_CASE("composition: gifford, P = 5") {
    const auto a = assign_by_composition(gifford_grid(), 5, gifford_map(), 3);
    CHECK(a.n_pseudocategories == 5);
    CHECK(a.chance_accuracy == 0.20);
    for (const auto& m : a.members()) CHECK(m.size() == 23);
    CHECK(balance_error(a) == 0);
    for (const auto& [p, counts] : a.per_pseudo_composition)
      for (const auto& [c, n] : counts) CHECK(n == gifford_composition()[static_cast<std::size_t>(c)]);
  }

  TEST_CASE("composition: singleton pseudocategories") {
    ExemplarsByCategory ex{{4, {10, 11, 12}}};
    const auto a = assign_by_composition(ex, 3, {{0, 0}, {1, 0}, {4, 1}}, 9);
    for (const auto& m : a.members()) CHECK(m.size() == 1);
  }

  TEST_CASE("composition: mismatch") {
    ExemplarsByCategory ex{{0, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}};
    CHECK(code_of([&] { assign_by_composition(ex, 5, {{0, 3}}, 0); }) == ErrorCode::CompositionMismatch);
  }

  TEST_CASE("seed determinism") {
    const auto a = assign_by_composition(gifford_grid(), 5, gifford_map(), 42);
    const auto b = assign_by_composition(gifford_grid(), 5, gifford_map(), 42);
    const auto c = assign_by_composition(gifford_grid(), 5, gifford_map(), 43);
    CHECK(a.exemplar_to_pseudo == b.exemplar_to_pseudo);
    CHECK(a.exemplar_to_pseudo != c.exemplar_to_pseudo);
  }

  TEST_CASE("randomized balance and partition") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      CounterRng r(seed);
      const int p = 2 + static_cast<int>(r.below(6));
      const int categories = 1 + static_cast<int>(r.below(5));
      ExemplarsByCategory ex;
      std::map<int, int> comp;
      int id = 0;
      for (int c = 0; c < categories; ++c) {
        comp[c] = static_cast<int>(r.below(4));
        for (int j = 0; j < comp[c] * p; ++j) ex[c].push_back(id++);
      }
      const auto a = assign_by_composition(ex, p, comp, seed);
      REQUIRE(balance_error(a) == 0);
      REQUIRE(static_cast<int>(a.exemplar_to_pseudo.size()) == id);
      std::set<int> seen;
      for (const auto& m : a.members())
        for (int e : m) REQUIRE(seen.insert(e).second);
    }
  }

  TEST_CASE("relabel: identity-shaped assignment yields exemplar ids") {
    const auto d = exleak::testing::make_dataset({0, 0, 1, 1}, 3);
    PseudocategoryAssignment a;
    a.n_pseudocategories = 4;
    for (int e = 0; e < 4; ++e) a.exemplar_to_pseudo[e] = e;
    const auto r = relabel(d, a);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.labels(i).category_id == r.labels(i).exemplar_id);
    CHECK(r.manifest().category_names.size() == 4);
    CHECK(std::equal(r.payload().begin(), r.payload().end(), d.payload().begin()));
  }

  TEST_CASE("relabel: kaneshiro shape gives 432 trials per pseudolabel per subject") {
    auto cfg = preset("kaneshiro-like");
    cfg.n_subjects = 2;
    const auto d = generate_synthetic(cfg);
    const auto a = assign_one_per_category(exemplars_by_category(d), 12, 0);
    const auto r = relabel(d, a);
    std::map<std::pair<int, int>, int> counts;
    for (const auto& t : r.trial_table()) ++counts[{t.subject_id, t.category_id}];
    CHECK(counts.size() == 24);
    for (const auto& [key, n] : counts) CHECK(n == 432);
  }

  TEST_CASE("relabel: unmapped exemplar") {
    const auto d = exleak::testing::make_dataset({0, 1}, 1);
    PseudocategoryAssignment a;
    a.n_pseudocategories = 2;
    a.exemplar_to_pseudo = {{0, 0}};
    CHECK(code_of([&] { relabel(d, a); }) == ErrorCode::UnmappedExemplar);
  }

  TEST_CASE("json round trip and balance check on load") {
    const auto a = assign_one_per_category(grid(3, 4), 4, 5);
    std::map<int, int> cats;
    for (const auto& [c, list] : grid(3, 4))
      for (int e : list) cats[e] = c;
    const auto back = assignment_from_json(to_json(a), cats);
    CHECK(back.exemplar_to_pseudo == a.exemplar_to_pseudo);
    CHECK(back.chance_accuracy == 0.25);
    nlohmann::json bad = {{"pseudocategories", {{0, 1}, {2, 3}}}};  // both from category 0 in group 0
    CHECK_THROWS_AS(assignment_from_json(bad, {{0, 0}, {1, 0}, {2, 1}, {3, 1}}), Error);
  }
}
