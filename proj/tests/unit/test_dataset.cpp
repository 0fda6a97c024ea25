#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "exleak/dataset.hpp"
#include "exleak/error.hpp"
#include "exleak/synth.hpp"
#include "helpers.hpp"

using namespace exleak;
using exleak::testing::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected exleak::Error");
  return ErrorCode::EmptyInput;
}

void write_manifest(const std::filesystem::path& dir, nlohmann::json j, std::size_t payload_values) {
  std::ofstream(dir / "manifest.json") << j.dump();
  std::vector<float> zeros(payload_values, 0.5f);
  std::ofstream(dir / "data.f32", std::ios::binary)
      .write(reinterpret_cast<const char*>(zeros.data()), static_cast<std::streamsize>(zeros.size() * 4));
}

nlohmann::json manifest_json(int n_trials, int c, int t) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < n_trials; ++i) rows.push_back({0, 0, 0});
  return {{"n_trials", n_trials}, {"n_channels", c},       {"n_samples", t},           {"exemplar_names", {"e0"}},
          {"category_names", {"c0"}}, {"subject_ids", {0}}, {"data_file", "data.f32"}, {"format_version", 1},
          {"trial_table", rows}};
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("empty manifest loads as an empty dataset") {
    TempDir dir;
    write_manifest(dir.path(), manifest_json(0, 4, 5), 0);
    const auto d = load_dataset(dir.path() / "manifest.json");
    CHECK(d.size() == 0);
    CHECK(d.empty());
  }

  TEST_CASE("payload shorter than declared is PayloadSizeMismatch") {
    TempDir dir;
    write_manifest(dir.path(), manifest_json(10, 2, 3), 9 * 2 * 3);
    CHECK(code_of([&] { load_dataset(dir.path() / "manifest.json"); }) == ErrorCode::PayloadSizeMismatch);
  }

  TEST_CASE("missing manifest and missing payload are MissingFile") {
    TempDir dir;
    CHECK(code_of([&] { load_dataset(dir.path() / "manifest.json"); }) == ErrorCode::MissingFile);
    std::ofstream(dir.path() / "manifest.json") << manifest_json(1, 1, 1).dump();
    CHECK(code_of([&] { load_dataset(dir.path() / "manifest.json"); }) == ErrorCode::MissingFile);
  }

  TEST_CASE("malformed manifests are rejected") {
    TempDir dir;
    auto j = manifest_json(1, 1, 1);
    j.erase("n_channels");
    write_manifest(dir.path(), j, 1);
    CHECK(code_of([&] { load_dataset(dir.path() / "manifest.json"); }) == ErrorCode::MalformedManifest);
    j = manifest_json(1, 1, 1);
    j["trial_table"][0] = {5, 0, 0};
    write_manifest(dir.path(), j, 1);
    CHECK(code_of([&] { load_dataset(dir.path() / "manifest.json"); }) == ErrorCode::MalformedManifest);
  }

  TEST_CASE("non-finite payload values are rejected") {
    DatasetManifest m;
    m.n_trials = 1;
    m.n_channels = 1;
    m.n_samples = 2;
    m.exemplar_names = {"e"};
    m.category_names = {"c"};
    m.subject_ids = {0};
    CHECK(code_of([&] { Dataset(m, {1.0f, std::numeric_limits<float>::quiet_NaN()}, {{0, 0, 0}}); }) ==
          ErrorCode::NonFiniteValue);
    CHECK(code_of([&] { Dataset(m, {std::numeric_limits<float>::infinity(), 0.0f}, {{0, 0, 0}}); }) ==
          ErrorCode::NonFiniteValue);
  }

  TEST_CASE("save then load is bit-exact") {
    TempDir dir;
    SynthConfig cfg;
    cfg.n_categories = 3;
    cfg.exemplars_per_category = 2;
    cfg.trials_per_exemplar = 4;
    cfg.n_subjects = 2;
    cfg.n_channels = 3;
    cfg.n_samples = 5;
    cfg.seed = 17;
    const auto d = generate_synthetic(cfg);
    const auto path = save_dataset(d, dir.path());
    const auto back = load_dataset(path);
    CHECK(back.identical_to(d));
    CHECK(back.manifest() == d.manifest());
    CHECK(std::filesystem::file_size(dir.path() / "data.f32") == d.size() * 15 * 4);
  }

  TEST_CASE("payload is little-endian float32 in trial, channel, sample order") {
    TempDir dir;
    Trial t{2, 2, {1.0f, 2.0f, 3.0f, -0.5f}, {0, 0, 0}};
    const auto d = Dataset::from_trials(std::span<const Trial>(&t, 1), {"e"}, {"c"});
    save_dataset(d, dir.path());
    std::ifstream in(dir.path() / "data.f32", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    REQUIRE(bytes.size() == 16);
    // 1.0f = 0x3F800000, -0.5f = 0xBF000000
    CHECK(bytes[0] == 0x00);
    CHECK(bytes[3] == 0x3F);
    CHECK(bytes[2] == 0x80);
    CHECK(bytes[15] == 0xBF);
    CHECK(d.trial(0).at(1, 1) == -0.5f);
  }

  TEST_CASE("validate_dataset on a kaneshiro-shaped dataset") {
    auto cfg = preset("kaneshiro-like");
    cfg.n_subjects = 1;
    const auto r = validate_dataset(generate_synthetic(cfg));
    CHECK(r.trials_per_exemplar.size() == 72);
    for (const auto& [e, n] : r.trials_per_exemplar) CHECK(n == 72);
    CHECK(r.exemplars_per_category.size() == 6);
    for (const auto& [c, n] : r.exemplars_per_category) CHECK(n == 12);
    CHECK_FALSE(r.has_flags());
  }

  TEST_CASE("inconsistent exemplar categories are flagged") {
    std::vector<Trial> trials;
    for (int i = 0; i < 4; ++i) trials.push_back({1, 1, {float(i)}, {i < 2 ? 3 : 0, i == 1 ? 1 : 0, 0}});
    const auto d = Dataset::from_trials(trials, {"a", "b", "c", "d"}, {"x", "y"});
    const auto r = validate_dataset(d);
    REQUIRE(r.has_flags());
    CHECK(r.inconsistent_exemplars.at(3) == std::vector<int>{0, 1});
    CHECK(r.inconsistent_exemplars.size() == 1);
  }

  TEST_CASE("empty dataset gives an empty report") {
    const auto d = Dataset::from_trials({}, {}, {});
    const auto r = validate_dataset(d);
    CHECK(r.trials_per_exemplar.empty());
    CHECK(r.exemplars_per_category.empty());
    CHECK_FALSE(r.has_flags());
  }

  TEST_CASE("flatten_trial is channel-major") {
    Trial a{1, 3, {1, 2, 3}, {}};
    CHECK(flatten_trial(a.view()) == std::vector<float>{1, 2, 3});
    Trial b{2, 2, {10, 11, 20, 21}, {}};  // [[a,b],[c,d]]
    CHECK(flatten_trial(b.view()) == std::vector<float>{10, 11, 20, 21});
    const auto back = unflatten_trial(flatten_trial(b.view()), 2, 2);
    CHECK(back.data == b.data);
    CHECK(back.view().at(1, 0) == 20);
    CHECK_THROWS_AS(unflatten_trial(std::vector<float>{1, 2, 3}, 2, 2), Error);
  }

  TEST_CASE("flatten round-trip is bit-exact for awkward floats") {
    Trial t{2, 3, {-0.0f, 1e-38f, 3.4e38f, -7.25f, 1.0f / 3.0f, 2e-45f}, {}};
    const auto back = unflatten_trial(flatten_trial(t.view()), 2, 3);
    for (std::size_t i = 0; i < t.data.size(); ++i)
      CHECK(std::bit_cast<std::uint32_t>(back.data[i]) == std::bit_cast<std::uint32_t>(t.data[i]));
  }

  TEST_CASE("subject helpers") {
    const auto d = exleak::testing::make_dataset({0, 1}, 2, 1, 1, 3);
    CHECK(d.present_subjects() == std::vector<int>{0, 1, 2});
    CHECK(d.trials_of_subject(1) == std::vector<std::size_t>{4, 5, 6, 7});
  }
}
