#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "exleak/dataset.hpp"

namespace exleak {

/// Receives the dataset index of every trial read during a fit.
class AccessRecorder {
 public:
  virtual ~AccessRecorder() = default;
  virtual void on_read(std::size_t trial_index) = 0;
};

/// A dataset restricted to a list of trial indices. All trial reads go
/// through trial(), which reports them to the optional recorder.
class TrialSet {
 public:
  TrialSet(const Dataset& dataset, std::span<const std::size_t> indices, AccessRecorder* recorder = nullptr)
      : dataset_(&dataset), indices_(indices), recorder_(recorder) {}

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  int channels() const noexcept { return dataset_->channels(); }
  int samples() const noexcept { return dataset_->samples(); }
  std::size_t feature_dim() const noexcept { return dataset_->feature_dim(); }

  TrialView trial(std::size_t position) const {
    const auto index = indices_[position];
    if (recorder_) recorder_->on_read(index);
    return dataset_->trial(index);
  }

  std::size_t dataset_index(std::size_t position) const { return indices_[position]; }

 private:
  const Dataset* dataset_;
  std::span<const std::size_t> indices_;
  AccessRecorder* recorder_;
};

/// Per-feature standardizer on flattened trials: (x - mean) / (std + 1e-8).
class Normalizer {
 public:
  static constexpr double kEpsilon = 1e-8;

  Normalizer() = default;

  /// Population mean and standard deviation over the given trials.
  static Normalizer fit(const TrialSet& trials);
  /// mean 0, std 1 - epsilon, so transform() is the identity.
  static Normalizer identity(std::size_t dim);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::VectorXd& stddev() const noexcept { return stddev_; }

  /// Row i of the result is the standardized flattened trial i.
  Eigen::MatrixXd transform(const TrialSet& trials) const;
  Eigen::VectorXd transform(std::span<const float> features) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
  Eigen::VectorXd inv_scale_;
  bool identity_ = false;
};

}  // namespace exleak
