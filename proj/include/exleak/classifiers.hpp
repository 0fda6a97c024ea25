#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "exleak/dataset.hpp"
#include "exleak/normalizer.hpp"
#include "exleak/shallow_conv.hpp"

namespace exleak {

struct KnnSpec {
  int k = 5;
};

struct LdaSpec {
  double shrinkage = 0.1;
};

struct SvmSpec {
  double lambda = 1e-4;
  int epochs = 20;
  std::uint64_t seed = 0;
};

struct ShallowConvSpec {
  int n_temporal_filters = 8;
  int temporal_kernel_len = 0;  // 0: ceil(samples / 4)
  int n_spatial_filters = 8;
  int pool_len = 0;  // 0: ceil(samples / 8)
  double learning_rate = 0.1;
  int epochs = 6;
  int batch_size = 32;
  std::uint64_t seed = 0;

  ConvShape resolve(int channels, int samples, int n_classes) const;
};

using ClassifierSpec = std::variant<KnnSpec, LdaSpec, SvmSpec, ShallowConvSpec>;

std::string_view kind_name(const ClassifierSpec& spec) noexcept;
void validate(const ClassifierSpec& spec);
/// Replaces the classifier's seed (no-op for seedless kinds).
ClassifierSpec with_seed(const ClassifierSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const ClassifierSpec& spec);
ClassifierSpec classifier_spec_from_json(const nlohmann::json& j);

struct KnnModel {
  int k = 1;
  Eigen::MatrixXd train;  // n x D
  Eigen::VectorXd train_sq_norms;
  std::vector<int> labels;
};

struct LdaModel {
  Eigen::MatrixXd means;    // K x D (rows of absent classes are zero)
  Eigen::MatrixXd weights;  // K x D, rows = precision * mean
  Eigen::VectorXd bias;     // -0.5 mean' precision mean + log prior
  std::vector<bool> present;
  double shrinkage = 0.0;
};

struct SvmModel {
  Eigen::MatrixXd weights;  // K x D
  Eigen::VectorXd bias;     // K
};

struct ShallowConvModel {
  ShallowConvNet net;
  std::vector<double> epoch_losses;
};

class TrainedModel {
 public:
  using State = std::variant<KnnModel, LdaModel, SvmModel, ShallowConvModel>;

  TrainedModel(State state, int n_classes, int channels, int samples)
      : state_(std::move(state)), n_classes_(n_classes), channels_(channels), samples_(samples) {}

  const State& state() const noexcept { return state_; }
  int n_classes() const noexcept { return n_classes_; }
  int channels() const noexcept { return channels_; }
  int samples() const noexcept { return samples_; }

 private:
  State state_;
  int n_classes_;
  int channels_;
  int samples_;
};

Normalizer fit_normalizer(const TrialSet& trials);

/// Labels must lie in [0, n_classes); n_classes <= 0 means max(label) + 1.
TrainedModel fit(const ClassifierSpec& spec, const TrialSet& trials, std::span<const int> labels,
                 const Normalizer& normalizer, int n_classes = 0);
std::vector<int> predict(const TrainedModel& model, const TrialSet& trials, const Normalizer& normalizer);

/// Feature-level entry points; rows of `features` are already-normalized
/// flattened trials of the given channels x samples shape.
TrainedModel fit_features(const ClassifierSpec& spec, const Eigen::MatrixXd& features, std::span<const int> labels,
                          int channels, int samples, int n_classes = 0);
std::vector<int> predict_features(const TrainedModel& model, const Eigen::MatrixXd& features);

/// Per-class scores (kNN: vote counts, LDA: discriminants, SVM: margins,
/// shallowconv: softmax probabilities).
Eigen::MatrixXd decision_scores(const TrainedModel& model, const Eigen::MatrixXd& features);

namespace detail {
KnnModel fit_knn(const KnnSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels);
std::vector<int> predict_knn(const KnnModel& m, const Eigen::MatrixXd& x, int n_classes);
LdaModel fit_lda(const LdaSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes);
Eigen::MatrixXd lda_scores(const LdaModel& m, const Eigen::MatrixXd& x);
SvmModel fit_svm(const SvmSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes);
/// Regularized hinge objective of the binary one-vs-rest problem for `cls`.
double svm_objective(double lambda, const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                     std::span<const int> labels, int cls);
ShallowConvModel fit_shallow_conv(const ShallowConvSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels,
                                  const ConvShape& shape);
int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores);
}  // namespace detail

struct GradientCheckOptions {
  double step = 1e-3;
  bool corrupt_backward = false;
};

/// Max over all network parameters of |g_analytic - g_fd| / max(1, |g_analytic|, |g_fd|)
/// for the mean cross-entropy of `batch`, labels taken from category ids.
double gradient_check(const ShallowConvSpec& spec, std::span<const TrialView> batch,
                      const GradientCheckOptions& options = {});
double gradient_check(ShallowConvNet& net, const Eigen::MatrixXd& batch, std::span<const int> labels,
                      const GradientCheckOptions& options = {});

}  // namespace exleak
