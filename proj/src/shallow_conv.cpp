#include "exleak/shallow_conv.hpp"

#include <cmath>

#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak {

ConvParams ConvParams::zeros(const ConvShape& s) {
  ConvParams p;
  p.temporal = Eigen::MatrixXd::Zero(s.n_temporal, s.kernel);
  p.spatial = Eigen::MatrixXd::Zero(s.n_spatial, s.n_temporal * s.channels);
  p.spatial_bias = Eigen::VectorXd::Zero(s.n_spatial);
  p.dense = Eigen::MatrixXd::Zero(s.n_classes, s.n_features());
  p.dense_bias = Eigen::VectorXd::Zero(s.n_classes);
  return p;
}

void ConvParams::for_each(const std::function<void(double&)>& fn) {
  for (Eigen::Index i = 0; i < temporal.size(); ++i) fn(temporal.data()[i]);
  for (Eigen::Index i = 0; i < spatial.size(); ++i) fn(spatial.data()[i]);
  for (Eigen::Index i = 0; i < spatial_bias.size(); ++i) fn(spatial_bias.data()[i]);
  for (Eigen::Index i = 0; i < dense.size(); ++i) fn(dense.data()[i]);
  for (Eigen::Index i = 0; i < dense_bias.size(); ++i) fn(dense_bias.data()[i]);
}

std::size_t ConvParams::count() const noexcept {
  return static_cast<std::size_t>(temporal.size() + spatial.size() + spatial_bias.size() + dense.size() +
                                  dense_bias.size());
}

ShallowConvNet::ShallowConvNet(const ConvShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.channels < 1 || shape.samples < 1 || shape.n_temporal < 1 || shape.n_spatial < 1 || shape.kernel < 1 ||
      shape.kernel > shape.samples || shape.pool < 1 || shape.n_windows() < 1 || shape.n_classes < 2)
    throw Error(ErrorCode::ConfigInvalid, "shallow conv shape is invalid for this input size");
  params_ = ConvParams::zeros(shape);
  CounterRng rng(derive_key(seed, {0x636f6e76}));
  // The two convolutions compose into one filter, so only the product of
  // their scales matters for the forward pass. Giving both factors the same
  // sd (C*K*F)^(-1/4) keeps pre-activations at unit variance while balancing
  // gradient magnitudes between the layers.
  const double conv_sd =
      std::pow(static_cast<double>(shape.channels) * shape.kernel * shape.n_temporal, -0.25);
  const double temporal_sd = conv_sd;
  const double spatial_sd = conv_sd;
  const double dense_sd = 1.0 / std::sqrt(static_cast<double>(shape.n_features()));
  for (Eigen::Index i = 0; i < params_.temporal.size(); ++i) params_.temporal.data()[i] = temporal_sd * rng.normal();
  for (Eigen::Index i = 0; i < params_.spatial.size(); ++i) params_.spatial.data()[i] = spatial_sd * rng.normal();
  for (Eigen::Index i = 0; i < params_.dense.size(); ++i) params_.dense.data()[i] = dense_sd * rng.normal();
}

Eigen::MatrixXd ShallowConvNet::effective_filters() const {
  // The two linear convolutions compose into one filter bank:
  // eff[g][c*K + k] = sum_f spatial[g][f*C + c] * temporal[f][k].
  const int C = shape_.channels;
  const int K = shape_.kernel;
  Eigen::MatrixXd eff(shape_.n_spatial, C * K);
  Eigen::MatrixXd ws_c(shape_.n_spatial, shape_.n_temporal);
  for (int c = 0; c < C; ++c) {
    for (int f = 0; f < shape_.n_temporal; ++f) ws_c.col(f) = params_.spatial.col(f * C + c);
    eff.middleCols(c * K, K) = ws_c * params_.temporal;
  }
  return eff;
}

Eigen::MatrixXd ShallowConvNet::im2col(const Eigen::MatrixXd& batch) const {
  const int C = shape_.channels;
  const int T = shape_.samples;
  const int K = shape_.kernel;
  const int L = shape_.conv_len();
  if (batch.cols() != static_cast<Eigen::Index>(C) * T)
    throw Error(ErrorCode::ShapeMismatch, "input width differs from channels x samples");
  Eigen::MatrixXd cols(batch.rows() * L, C * K);
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    for (int s = 0; s < L; ++s) {
      auto out = cols.row(b * L + s);
      for (int c = 0; c < C; ++c)
        for (int k = 0; k < K; ++k) out[c * K + k] = batch(b, c * T + s + k);
    }
  }
  return cols;
}

namespace {

struct Forward {
  Eigen::MatrixXd z;       // (B*L) x G
  Eigen::MatrixXd pooled;  // B x (G*W)
  Eigen::MatrixXd logits;  // B x classes
};

}  // namespace

static Forward run_forward(const ConvShape& s, const ConvParams& p, const Eigen::MatrixXd& cols,
                           const Eigen::MatrixXd& eff, Eigen::Index batch) {
  const int L = s.conv_len();
  const int W = s.n_windows();
  const int G = s.n_spatial;
  Forward f;
  f.z = cols * eff.transpose();
  f.z.rowwise() += p.spatial_bias.transpose();
  f.pooled.resize(batch, G * W);
  Eigen::MatrixXd features(batch, G * W);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int g = 0; g < G; ++g) {
      for (int w = 0; w < W; ++w) {
        double acc = 0.0;
        for (int i = 0; i < s.pool; ++i) {
          const double v = f.z(b * L + w * s.pool + i, g);
          acc += v * v;
        }
        const double mean = acc / s.pool;
        f.pooled(b, g * W + w) = mean;
        features(b, g * W + w) = std::log(mean + ShallowConvNet::kLogFloor);
      }
    }
  }
  f.logits = features * p.dense.transpose();
  f.logits.rowwise() += p.dense_bias.transpose();
  return f;
}

Eigen::MatrixXd ShallowConvNet::logits(const Eigen::MatrixXd& batch) const {
  return run_forward(shape_, params_, im2col(batch), effective_filters(), batch.rows()).logits;
}

Eigen::MatrixXd ShallowConvNet::probabilities(const Eigen::MatrixXd& batch) const {
  Eigen::MatrixXd z = logits(batch);
  for (Eigen::Index b = 0; b < z.rows(); ++b) {
    const double m = z.row(b).maxCoeff();
    z.row(b) = (z.row(b).array() - m).exp().matrix();
    z.row(b) /= z.row(b).sum();
  }
  return z;
}

double ShallowConvNet::loss(const Eigen::MatrixXd& batch, std::span<const int> labels, ConvParams* grad,
                            bool flip_output_gradient) const {
  const auto B = batch.rows();
  if (static_cast<std::size_t>(B) != labels.size()) throw Error(ErrorCode::LengthMismatch, "labels vs batch rows");
  const int L = shape_.conv_len();
  const int W = shape_.n_windows();
  const int G = shape_.n_spatial;
  const int C = shape_.channels;
  const int K = shape_.kernel;

  const Eigen::MatrixXd cols = im2col(batch);
  const Eigen::MatrixXd eff = effective_filters();
  const Forward f = run_forward(shape_, params_, cols, eff, B);

  double total = 0.0;
  Eigen::MatrixXd dlogits(B, shape_.n_classes);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double m = f.logits.row(b).maxCoeff();
    const Eigen::RowVectorXd e = (f.logits.row(b).array() - m).exp().matrix();
    const double z = e.sum();
    const int y = labels[static_cast<std::size_t>(b)];
    total += -(f.logits(b, y) - m - std::log(z));
    dlogits.row(b) = e / z;
    dlogits(b, y) -= 1.0;
  }
  const double mean_loss = total / static_cast<double>(B);
  if (!grad) return mean_loss;

  dlogits /= static_cast<double>(B);
  if (flip_output_gradient) dlogits = -dlogits;

  Eigen::MatrixXd features = (f.pooled.array() + kLogFloor).log().matrix();
  *grad = ConvParams::zeros(shape_);
  grad->dense = dlogits.transpose() * features;
  grad->dense_bias = dlogits.colwise().sum().transpose();
  const Eigen::MatrixXd dfeatures = dlogits * params_.dense;
  const Eigen::MatrixXd dpooled = dfeatures.array() / (f.pooled.array() + kLogFloor);

  // Samples past the last full pooling window get zero gradient.
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(B * L, G);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int g = 0; g < G; ++g)
      for (int w = 0; w < W; ++w) {
        const double d = dpooled(b, g * W + w) / shape_.pool;
        for (int i = 0; i < shape_.pool; ++i) {
          const auto r = b * L + w * shape_.pool + i;
          dz(r, g) = 2.0 * f.z(r, g) * d;
        }
      }
  grad->spatial_bias = dz.colwise().sum().transpose();
  const Eigen::MatrixXd deff = dz.transpose() * cols;  // G x (C*K)

  Eigen::MatrixXd ws_c(G, shape_.n_temporal);
  for (int c = 0; c < C; ++c) {
    const auto deff_c = deff.middleCols(c * K, K);
    const Eigen::MatrixXd dws_c = deff_c * params_.temporal.transpose();  // G x F
    for (int fi = 0; fi < shape_.n_temporal; ++fi) {
      grad->spatial.col(fi * C + c) = dws_c.col(fi);
      ws_c.col(fi) = params_.spatial.col(fi * C + c);
    }
    grad->temporal.noalias() += ws_c.transpose() * deff_c;
  }
  return mean_loss;
}

}  // namespace exleak
