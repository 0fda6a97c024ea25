#include <doctest.h>

#include "exleak/config.hpp"
#include "exleak/error.hpp"

using namespace exleak;
using nlohmann::json;

namespace {

ErrorCode code_of(const json& j) {
  try {
    validate(audit_config_from_json(j));
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults follow the preset") {
    const auto cfg = audit_config_from_json({{"dataset", {{"preset", "kaneshiro-like"}}}});
    validate(cfg);
    CHECK(cfg.protocols.size() == 2);
    CHECK(cfg.folds_for(Protocol::LeakyStratified) == 12);
    CHECK(cfg.folds_for(Protocol::CleanDisjoint) == 12);
    CHECK(cfg.classifiers.size() == 4);
    CHECK(cfg.comparisons() == 8);
    CHECK(cfg.alpha == 0.05);
    const auto g = audit_config_from_json({{"dataset", {{"preset", "gifford-like"}}}});
    CHECK(g.folds_for(Protocol::LeakyStratified) == 10);
  }

  TEST_CASE("k as integer or per protocol") {
    auto cfg = audit_config_from_json({{"dataset", {{"preset", "kaneshiro-like"}}}, {"k", 5}});
    CHECK(cfg.folds_for(Protocol::CleanDisjoint) == 5);
    cfg = audit_config_from_json({{"dataset", {{"preset", "kaneshiro-like"}}}, {"k", {{"clean-disjoint", 3}}}});
    CHECK(cfg.folds_for(Protocol::CleanDisjoint) == 3);
    CHECK(cfg.folds_for(Protocol::LeakyStratified) == 12);
  }

  TEST_CASE("invalid configurations") {
    CHECK(code_of({{"dataset", {{"preset", "kaneshiro-like"}}}, {"k", 1}}) == ErrorCode::InvalidK);
    CHECK(code_of(json::object()) == ErrorCode::ConfigInvalid);
    CHECK(code_of({{"dataset", json::object()}}) == ErrorCode::ConfigInvalid);
    CHECK(code_of({{"dataset", {{"preset", "kaneshiro-like"}}}, {"bogus", 1}}) == ErrorCode::ConfigInvalid);
    CHECK(code_of({{"dataset", {{"preset", "kaneshiro-like"}}}, {"alpha", 1.5}}) == ErrorCode::ConfigInvalid);
    CHECK(code_of({{"dataset", {{"preset", "kaneshiro-like"}}}, {"protocols", json::array()}}) ==
          ErrorCode::ConfigInvalid);
    CHECK(code_of({{"dataset", {{"preset", "kaneshiro-like"}}}, {"classifiers", json::array()}}) ==
          ErrorCode::ConfigInvalid);
  }

  TEST_CASE("classifier names are unique") {
    const auto cfg = audit_config_from_json(
        {{"dataset", {{"preset", "kaneshiro-like"}}},
         {"classifiers", {"knn", {{"kind", "knn"}, {"k", 1}}, {{"kind", "lda"}, {"name", "shrunk"}}}}});
    REQUIRE(cfg.classifiers.size() == 3);
    CHECK(cfg.classifiers[0].name == "knn");
    CHECK(cfg.classifiers[1].name == "knn_2");
    CHECK(cfg.classifiers[2].name == "shrunk");
  }

  TEST_CASE("echo parses back to the same config") {
    const json j{{"dataset", {{"preset", "gifford-like"}, {"overrides", {{"n_subjects", 2}}}}},
                 {"assignment", {{"scheme", "composition"}, {"n_pseudocategories", 5}, {"seed", 3}}},
                 {"protocols", {"clean-disjoint"}},
                 {"k", 4},
                 {"alternative", "two-sided"},
                 {"seed", 11}};
    const auto echo = to_json(audit_config_from_json(j));
    auto reparsed = echo;
    reparsed["dataset"].erase("resolved");
    CHECK(to_json(audit_config_from_json(reparsed)) == echo);
  }

  TEST_CASE("dotted overrides") {
    json doc{{"dataset", {{"preset", "kaneshiro-like"}}}, {"classifiers", {{{"kind", "knn"}}}}};
    apply_override(doc, "dataset.overrides.n_subjects=2");
    apply_override(doc, "classifiers.0.k=3");
    apply_override(doc, "dataset.preset=gifford-like");
    apply_override(doc, "alternative=two-sided");
    CHECK(doc["dataset"]["overrides"]["n_subjects"] == 2);
    CHECK(doc["classifiers"][0]["k"] == 3);
    CHECK(doc["dataset"]["preset"] == "gifford-like");
    CHECK(doc["alternative"] == "two-sided");
    CHECK_THROWS_AS(apply_override(doc, "novalue"), Error);
    CHECK_THROWS_AS(apply_override(doc, "classifiers.5.k=1"), Error);
    CHECK_THROWS_AS(apply_override(doc, "alpha..x=1"), Error);
  }
}
