#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "exleak/classifiers.hpp"
#include "exleak/error.hpp"

namespace exleak::detail {

LdaModel fit_lda(const LdaSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes) {
  const auto n = x.rows();
  const auto d = x.cols();
  LdaModel m;
  m.shrinkage = spec.shrinkage;
  m.means = Eigen::MatrixXd::Zero(n_classes, d);
  std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    m.means.row(y) += x.row(i);
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  m.present.assign(static_cast<std::size_t>(n_classes), false);
  int n_present = 0;
  for (int c = 0; c < n_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      m.means.row(c) /= counts[static_cast<std::size_t>(c)];
      m.present[static_cast<std::size_t>(c)] = true;
      ++n_present;
    }
  }

  Eigen::MatrixXd centered = x;
  for (Eigen::Index i = 0; i < n; ++i) centered.row(i) -= m.means.row(labels[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov = cov.selfadjointView<Eigen::Lower>();
  const double dof = n > n_present ? static_cast<double>(n - n_present) : static_cast<double>(n);
  cov /= dof;

  const double gamma = spec.shrinkage;
  const double mean_variance = cov.trace() / static_cast<double>(d);
  Eigen::MatrixXd shrunk = (1.0 - gamma) * cov;
  shrunk.diagonal().array() += gamma * mean_variance;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(shrunk);
  if (ldlt.info() != Eigen::Success)
    throw Error(ErrorCode::NonFiniteLoss, "pooled covariance factorization failed");
  m.weights = ldlt.solve(m.means.transpose()).transpose();
  if (!m.weights.allFinite()) throw Error(ErrorCode::NonFiniteLoss, "LDA discriminants are not finite");

  const double log_prior = -std::log(static_cast<double>(n_present));  // uniform over present classes
  m.bias.resize(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    m.bias[c] = m.present[static_cast<std::size_t>(c)]
                    ? -0.5 * m.weights.row(c).dot(m.means.row(c)) + log_prior
                    : -std::numeric_limits<double>::infinity();
  }
  return m;
}

Eigen::MatrixXd lda_scores(const LdaModel& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd s = x * m.weights.transpose();
  s.rowwise() += m.bias.transpose();
  return s;
}

}  // namespace exleak::detail
