#include "exleak/normalizer.hpp"

#include <cmath>

#include "exleak/error.hpp"

namespace exleak {

Normalizer Normalizer::fit(const TrialSet& trials) {
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "normalizer needs at least one trial");
  const auto dim = static_cast<Eigen::Index>(trials.feature_dim());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  // Two passes: mean first, then centered squares, for numerical stability.
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto t = trials.trial(i);
    for (Eigen::Index j = 0; j < dim; ++j) sum[j] += t.data[static_cast<std::size_t>(j)];
  }
  const double n = static_cast<double>(trials.size());
  Normalizer out;
  out.mean_ = sum / n;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto t = trials.trial(i);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double d = t.data[static_cast<std::size_t>(j)] - out.mean_[j];
      sum_sq[j] += d * d;
    }
  }
  out.stddev_ = (sum_sq / n).cwiseSqrt();
  out.inv_scale_ = (out.stddev_.array() + kEpsilon).inverse();
  return out;
}

Normalizer Normalizer::identity(std::size_t dim) {
  Normalizer out;
  const auto d = static_cast<Eigen::Index>(dim);
  out.mean_ = Eigen::VectorXd::Zero(d);
  out.stddev_ = Eigen::VectorXd::Constant(d, 1.0 - kEpsilon);
  out.inv_scale_ = Eigen::VectorXd::Ones(d);
  out.identity_ = true;
  return out;
}

Eigen::MatrixXd Normalizer::transform(const TrialSet& trials) const {
  if (trials.feature_dim() != dim()) throw Error(ErrorCode::ShapeMismatch, "normalizer dimension differs from trials");
  const auto d = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(trials.size()), d);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto t = trials.trial(i);
    const Eigen::Map<const Eigen::VectorXf> raw(t.data.data(), d);
    if (identity_)
      out.row(static_cast<Eigen::Index>(i)) = raw.cast<double>().transpose();
    else
      out.row(static_cast<Eigen::Index>(i)) =
          ((raw.cast<double>() - mean_).array() * inv_scale_.array()).matrix().transpose();
  }
  return out;
}

Eigen::VectorXd Normalizer::transform(std::span<const float> features) const {
  if (features.size() != dim()) throw Error(ErrorCode::ShapeMismatch, "normalizer dimension differs from input");
  const Eigen::Map<const Eigen::VectorXf> raw(features.data(), static_cast<Eigen::Index>(features.size()));
  if (identity_) return raw.cast<double>();
  return ((raw.cast<double>() - mean_).array() * inv_scale_.array()).matrix();
}

}  // namespace exleak
