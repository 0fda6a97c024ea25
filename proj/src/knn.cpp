#include <algorithm>
#include <cmath>

#include "exleak/classifiers.hpp"
#include "exleak/error.hpp"

namespace exleak::detail {

KnnModel fit_knn(const KnnSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels) {
  KnnModel m;
  m.k = spec.k;
  m.train = x;
  m.train_sq_norms = x.rowwise().squaredNorm();
  m.labels.assign(labels.begin(), labels.end());
  return m;
}

std::vector<int> predict_knn(const KnnModel& m, const Eigen::MatrixXd& x, int n_classes) {
  const auto n_train = m.train.rows();
  const auto k = static_cast<Eigen::Index>(std::min<Eigen::Index>(m.k, n_train));
  std::vector<int> out(static_cast<std::size_t>(x.rows()));

  // Expanded squared distances via one matrix product screen candidates;
  // anything within a rounding margin of the k-th candidate is then
  // re-measured exactly, so the selection equals an exhaustive search.
  constexpr Eigen::Index kBlock = 256;
  std::vector<std::pair<double, Eigen::Index>> cand;
  std::vector<double> approx(static_cast<std::size_t>(n_train));
  std::vector<int> votes(static_cast<std::size_t>(n_classes));
  for (Eigen::Index start = 0; start < x.rows(); start += kBlock) {
    const auto rows = std::min(kBlock, x.rows() - start);
    const auto block = x.middleRows(start, rows);
    const Eigen::MatrixXd cross = block * m.train.transpose();
    const Eigen::VectorXd block_norms = block.rowwise().squaredNorm();
    for (Eigen::Index r = 0; r < rows; ++r) {
      double scale = block_norms[r];
      for (Eigen::Index j = 0; j < n_train; ++j) {
        approx[static_cast<std::size_t>(j)] = block_norms[r] + m.train_sq_norms[j] - 2.0 * cross(r, j);
        scale = std::max(scale, m.train_sq_norms[j]);
      }
      std::vector<double> sorted = approx;
      std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
      const double margin = 1e-9 * (scale + 1.0);
      const double cutoff = sorted[static_cast<std::size_t>(k - 1)] + margin;

      cand.clear();
      const auto row = x.row(start + r);
      for (Eigen::Index j = 0; j < n_train; ++j) {
        if (approx[static_cast<std::size_t>(j)] <= cutoff)
          cand.emplace_back((m.train.row(j) - row).squaredNorm(), j);
      }
      // Lowest training index wins among equidistant neighbours.
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());

      std::fill(votes.begin(), votes.end(), 0);
      for (Eigen::Index i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(m.labels[static_cast<std::size_t>(cand[static_cast<std::size_t>(i)].second)])];
      // max_element returns the first maximum: ties go to the smallest label.
      out[static_cast<std::size_t>(start + r)] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  }
  return out;
}

}  // namespace exleak::detail
