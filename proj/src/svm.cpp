#include <algorithm>
#include <cmath>
#include <numeric>

#include "exleak/classifiers.hpp"
#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak::detail {

// One-vs-rest Pegasos. Each binary problem appends a constant 1 feature whose
// weight is the bias. Weights are kept as scale * v so the (1 - eta*lambda)
// shrink is O(1).
SvmModel fit_svm(const SvmSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes) {
  const auto n = x.rows();
  const auto d = x.cols();
  const double lambda = spec.lambda;
  const double radius = 1.0 / std::sqrt(lambda);

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix v = RowMatrix::Zero(n_classes, d);
  const Eigen::MatrixXd xt = x.transpose();  // column i is sample i, contiguous
  Eigen::VectorXd vb = Eigen::VectorXd::Zero(n_classes);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(n_classes);
  Eigen::VectorXd v_sq = Eigen::VectorXd::Zero(n_classes);  // ||v||^2 including bias term
  const Eigen::VectorXd x_sq = (x.rowwise().squaredNorm().array() + 1.0).matrix();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng rng(derive_key(spec.seed, {0x73766d, static_cast<std::uint64_t>(epoch)}));
    shuffle(order, rng);
    for (const auto i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto row = xt.col(i);
      const Eigen::VectorXd raw = v * row + vb;  // margins before scaling
      const int yi = labels[static_cast<std::size_t>(i)];
      for (int c = 0; c < n_classes; ++c) {
        const double y = c == yi ? 1.0 : -1.0;
        const double margin = y * scale[c] * raw[c];
        const double shrink = 1.0 - eta * lambda;
        if (shrink <= 0.0) {
          v.row(c).setZero();
          vb[c] = 0.0;
          v_sq[c] = 0.0;
          scale[c] = 1.0;
        } else {
          scale[c] *= shrink;
        }
        if (margin < 1.0) {
          const double step = eta * y / scale[c];
          // ||v + step*x||^2 = ||v||^2 + 2 step v.x + step^2 ||x||^2 (v.x uses pre-update v)
          const double vx = shrink <= 0.0 ? 0.0 : raw[c];
          v_sq[c] += 2.0 * step * vx + step * step * x_sq[i];
          v.row(c) += step * row.transpose();
          vb[c] += step;
        }
        const double norm = std::abs(scale[c]) * std::sqrt(std::max(v_sq[c], 0.0));
        if (norm > radius) scale[c] *= radius / norm;
        // Keep the scale away from underflow.
        if (std::abs(scale[c]) < 1e-100) {
          v.row(c) *= scale[c];
          vb[c] *= scale[c];
          v_sq[c] *= scale[c] * scale[c];
          scale[c] = 1.0;
        }
      }
    }
  }
  SvmModel m;
  m.weights = scale.asDiagonal() * v;
  m.bias = scale.cwiseProduct(vb);
  if (!m.weights.allFinite() || !m.bias.allFinite()) throw Error(ErrorCode::NonFiniteLoss, "SVM weights diverged");
  return m;
}

double svm_objective(double lambda, const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                     std::span<const int> labels, int cls) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double y = labels[static_cast<std::size_t>(i)] == cls ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * (x.row(i).dot(w) + b));
  }
  return 0.5 * lambda * (w.squaredNorm() + b * b) + hinge / static_cast<double>(x.rows());
}

}  // namespace exleak::detail
