#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "exleak/dataset.hpp"

namespace exleak::testing {

// Dataset where exemplar e belongs to category category_of[e] and has
// trials_per_exemplar trials for each subject; values are seeded noise.
inline Dataset make_dataset(const std::vector<int>& category_of, int trials_per_exemplar, int channels = 2,
                            int samples = 3, int subjects = 1, unsigned seed = 1) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> normal;
  int n_categories = 0;
  for (int c : category_of) n_categories = std::max(n_categories, c + 1);
  std::vector<Trial> trials;
  for (int s = 0; s < subjects; ++s)
    for (std::size_t e = 0; e < category_of.size(); ++e)
      for (int r = 0; r < trials_per_exemplar; ++r) {
        Trial t{channels, samples, std::vector<float>(static_cast<std::size_t>(channels * samples)),
                {static_cast<int>(e), category_of[e], s}};
        for (auto& v : t.data) v = normal(gen);
        trials.push_back(std::move(t));
      }
  std::vector<std::string> exemplars, categories;
  for (std::size_t e = 0; e < category_of.size(); ++e) exemplars.push_back(fmt::format("ex{}", e));
  for (int c = 0; c < n_categories; ++c) categories.push_back(fmt::format("cat{}", c));
  return Dataset::from_trials(trials, exemplars, categories);
}

// n_categories x per_category exemplars, category-major ids.
inline std::vector<int> grid_categories(int n_categories, int per_category) {
  std::vector<int> out;
  for (int c = 0; c < n_categories; ++c)
    for (int j = 0; j < per_category; ++j) out.push_back(c);
  return out;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("exleak-test-{}-{}", static_cast<long>(::getpid()), counter++);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace exleak::testing
