#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace exleak {

struct ConvShape {
  int channels = 1;
  int samples = 1;
  int n_temporal = 8;
  int kernel = 1;
  int n_spatial = 8;
  int pool = 1;
  int n_classes = 2;

  int conv_len() const noexcept { return samples - kernel + 1; }
  int n_windows() const noexcept { return conv_len() / pool; }
  int n_features() const noexcept { return n_spatial * n_windows(); }
};

struct ConvParams {
  Eigen::MatrixXd temporal;      // n_temporal x kernel
  Eigen::MatrixXd spatial;       // n_spatial x (n_temporal * channels), column f*channels + c
  Eigen::VectorXd spatial_bias;  // n_spatial
  Eigen::MatrixXd dense;         // n_classes x n_features, column g*n_windows + w
  Eigen::VectorXd dense_bias;    // n_classes

  static ConvParams zeros(const ConvShape& shape);

  /// Visits every scalar parameter in a fixed order.
  void for_each(const std::function<void(double&)>& fn);
  std::size_t count() const noexcept;
};

/// Temporal convolution along samples, spatial convolution across channels,
/// square, mean pooling, log, affine, softmax.
class ShallowConvNet {
 public:
  static constexpr double kLogFloor = 1e-6;

  ShallowConvNet() = default;
  ShallowConvNet(const ConvShape& shape, std::uint64_t seed);

  const ConvShape& shape() const noexcept { return shape_; }
  ConvParams& params() noexcept { return params_; }
  const ConvParams& params() const noexcept { return params_; }

  /// Class logits, one row per input row (rows are channel-major flattened trials).
  Eigen::MatrixXd logits(const Eigen::MatrixXd& batch) const;
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& batch) const;

  /// Mean cross-entropy over the batch; fills `grad` (same layout as params)
  /// when non-null. `flip_output_gradient` negates the backward pass and
  /// exists only so tests can confirm the gradient check catches it.
  double loss(const Eigen::MatrixXd& batch, std::span<const int> labels, ConvParams* grad,
              bool flip_output_gradient = false) const;

 private:
  Eigen::MatrixXd effective_filters() const;  // n_spatial x (channels * kernel)
  Eigen::MatrixXd im2col(const Eigen::MatrixXd& batch) const;

  ConvShape shape_;
  ConvParams params_;
};

}  // namespace exleak
