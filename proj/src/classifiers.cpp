#include "exleak/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

int resolve_classes(std::span<const int> labels, int n_classes) {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no training trials");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  const int min_label = *std::min_element(labels.begin(), labels.end());
  if (min_label < 0) throw Error(ErrorCode::ConfigInvalid, "labels must be non-negative");
  if (n_classes <= 0) n_classes = max_label + 1;
  if (max_label >= n_classes)
    throw Error(ErrorCode::ConfigInvalid, fmt::format("label {} >= n_classes {}", max_label, n_classes));
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw Error(ErrorCode::SingleClassInput, "training labels contain a single class");
  return std::max(n_classes, 2);
}

}  // namespace

ConvShape ShallowConvSpec::resolve(int channels, int samples, int n_classes) const {
  ConvShape s;
  s.channels = channels;
  s.samples = samples;
  s.n_temporal = n_temporal_filters;
  s.kernel = temporal_kernel_len > 0 ? temporal_kernel_len : ceil_div(samples, 4);
  s.n_spatial = n_spatial_filters;
  s.pool = pool_len > 0 ? pool_len : ceil_div(samples, 8);
  s.n_classes = n_classes;
  return s;
}

std::string_view kind_name(const ClassifierSpec& spec) noexcept {
  return std::visit(overloaded{[](const KnnSpec&) { return std::string_view("knn"); },
                               [](const LdaSpec&) { return std::string_view("lda"); },
                               [](const SvmSpec&) { return std::string_view("svm"); },
                               [](const ShallowConvSpec&) { return std::string_view("shallowconv"); }},
                    spec);
}

void validate(const ClassifierSpec& spec) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigInvalid, m); };
  std::visit(overloaded{
                 [&](const KnnSpec& s) {
                   if (s.k < 1) fail("knn.k must be >= 1");
                 },
                 [&](const LdaSpec& s) {
                   if (!(s.shrinkage >= 0.0 && s.shrinkage <= 1.0)) fail("lda.shrinkage must be in [0, 1]");
                 },
                 [&](const SvmSpec& s) {
                   if (!(s.lambda > 0.0)) fail("svm.lambda must be > 0");
                   if (s.epochs < 1) fail("svm.epochs must be >= 1");
                 },
                 [&](const ShallowConvSpec& s) {
                   if (s.n_temporal_filters < 1 || s.n_spatial_filters < 1) fail("shallowconv filter counts must be >= 1");
                   if (s.temporal_kernel_len < 0 || s.pool_len < 0) fail("shallowconv lengths must be >= 0 (0 = auto)");
                   if (!(s.learning_rate > 0.0)) fail("shallowconv.learning_rate must be > 0");
                   if (s.epochs < 1 || s.batch_size < 1) fail("shallowconv epochs and batch_size must be >= 1");
                 },
             },
             spec);
}

ClassifierSpec with_seed(const ClassifierSpec& spec, std::uint64_t seed) {
  return std::visit(overloaded{[&](SvmSpec s) -> ClassifierSpec {
                                 s.seed = seed;
                                 return s;
                               },
                               [&](ShallowConvSpec s) -> ClassifierSpec {
                                 s.seed = seed;
                                 return s;
                               },
                               [](const auto& s) -> ClassifierSpec { return s; }},
                    spec);
}

nlohmann::json to_json(const ClassifierSpec& spec) {
  return std::visit(
      overloaded{
          [](const KnnSpec& s) -> nlohmann::json { return {{"kind", "knn"}, {"k", s.k}}; },
          [](const LdaSpec& s) -> nlohmann::json { return {{"kind", "lda"}, {"shrinkage", s.shrinkage}}; },
          [](const SvmSpec& s) -> nlohmann::json {
            return {{"kind", "svm"}, {"lambda", s.lambda}, {"epochs", s.epochs}, {"seed", s.seed}};
          },
          [](const ShallowConvSpec& s) -> nlohmann::json {
            return {{"kind", "shallowconv"},
                    {"n_temporal_filters", s.n_temporal_filters},
                    {"temporal_kernel_len", s.temporal_kernel_len},
                    {"n_spatial_filters", s.n_spatial_filters},
                    {"pool_len", s.pool_len},
                    {"learning_rate", s.learning_rate},
                    {"epochs", s.epochs},
                    {"batch_size", s.batch_size},
                    {"seed", s.seed}};
          },
      },
      spec);
}

ClassifierSpec classifier_spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return classifier_spec_from_json(nlohmann::json{{"kind", j}});
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorCode::ConfigInvalid, "classifier needs a 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  auto unknown = [&](const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items())
      if (key != "kind" && !allowed.contains(key))
        throw Error(ErrorCode::ConfigInvalid, fmt::format("unknown {} field '{}'", kind, key));
  };
  ClassifierSpec spec;
  try {
    if (kind == "knn") {
      unknown({"k"});
      spec = KnnSpec{j.value("k", KnnSpec{}.k)};
    } else if (kind == "lda") {
      unknown({"shrinkage"});
      spec = LdaSpec{j.value("shrinkage", LdaSpec{}.shrinkage)};
    } else if (kind == "svm") {
      unknown({"lambda", "epochs", "seed"});
      SvmSpec s;
      s.lambda = j.value("lambda", s.lambda);
      s.epochs = j.value("epochs", s.epochs);
      s.seed = j.value("seed", s.seed);
      spec = s;
    } else if (kind == "shallowconv") {
      unknown({"n_temporal_filters", "temporal_kernel_len", "n_spatial_filters", "pool_len", "learning_rate", "epochs",
               "batch_size", "seed"});
      ShallowConvSpec s;
      s.n_temporal_filters = j.value("n_temporal_filters", s.n_temporal_filters);
      s.temporal_kernel_len = j.value("temporal_kernel_len", s.temporal_kernel_len);
      s.n_spatial_filters = j.value("n_spatial_filters", s.n_spatial_filters);
      s.pool_len = j.value("pool_len", s.pool_len);
      s.learning_rate = j.value("learning_rate", s.learning_rate);
      s.epochs = j.value("epochs", s.epochs);
      s.batch_size = j.value("batch_size", s.batch_size);
      s.seed = j.value("seed", s.seed);
      spec = s;
    } else {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("unknown classifier kind '{}'", kind));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("classifier {}: {}", kind, e.what()));
  }
  validate(spec);
  return spec;
}

Normalizer fit_normalizer(const TrialSet& trials) { return Normalizer::fit(trials); }

namespace detail {

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<int>(best);
}

ShallowConvModel fit_shallow_conv(const ShallowConvSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels,
                                  const ConvShape& shape) {
  ShallowConvModel model{ShallowConvNet(shape, spec.seed), {}};
  auto& params = model.net.params();
  const auto n = x.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  ConvParams grad;
  Eigen::MatrixXd batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng rng(derive_key(spec.seed, {0x65706f63, static_cast<std::uint64_t>(epoch)}));
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += spec.batch_size) {
      const auto size = std::min<Eigen::Index>(spec.batch_size, n - start);
      batch.resize(size, x.cols());
      batch_labels.resize(static_cast<std::size_t>(size));
      for (Eigen::Index i = 0; i < size; ++i) {
        const auto src = order[static_cast<std::size_t>(start + i)];
        batch.row(i) = x.row(src);
        batch_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
      }
      const double loss = model.net.loss(batch, batch_labels, &grad);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::NonFiniteLoss, fmt::format("shallowconv loss diverged in epoch {}", epoch));
      epoch_loss += loss * static_cast<double>(size);
      params.temporal -= spec.learning_rate * grad.temporal;
      params.spatial -= spec.learning_rate * grad.spatial;
      params.spatial_bias -= spec.learning_rate * grad.spatial_bias;
      params.dense -= spec.learning_rate * grad.dense;
      params.dense_bias -= spec.learning_rate * grad.dense_bias;
    }
    model.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  return model;
}

}  // namespace detail

TrainedModel fit_features(const ClassifierSpec& spec, const Eigen::MatrixXd& x, std::span<const int> labels,
                          int channels, int samples, int n_classes) {
  validate(spec);
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in length");
  if (x.cols() != static_cast<Eigen::Index>(channels) * samples)
    throw Error(ErrorCode::ShapeMismatch, "feature width differs from channels x samples");
  n_classes = resolve_classes(labels, n_classes);
  auto state = std::visit(
      overloaded{
          [&](const KnnSpec& s) -> TrainedModel::State { return detail::fit_knn(s, x, labels); },
          [&](const LdaSpec& s) -> TrainedModel::State { return detail::fit_lda(s, x, labels, n_classes); },
          [&](const SvmSpec& s) -> TrainedModel::State { return detail::fit_svm(s, x, labels, n_classes); },
          [&](const ShallowConvSpec& s) -> TrainedModel::State {
            return detail::fit_shallow_conv(s, x, labels, s.resolve(channels, samples, n_classes));
          },
      },
      spec);
  return {std::move(state), n_classes, channels, samples};
}

Eigen::MatrixXd decision_scores(const TrainedModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != static_cast<Eigen::Index>(model.channels()) * model.samples())
    throw Error(ErrorCode::ShapeMismatch, "input shape differs from the trained shape");
  return std::visit(overloaded{
                        [&](const KnnModel& m) -> Eigen::MatrixXd {
                          // Scores are one-hot predictions; vote counts are internal.
                          const auto pred = detail::predict_knn(m, x, model.n_classes());
                          Eigen::MatrixXd s = Eigen::MatrixXd::Zero(x.rows(), model.n_classes());
                          for (Eigen::Index i = 0; i < x.rows(); ++i) s(i, pred[static_cast<std::size_t>(i)]) = 1.0;
                          return s;
                        },
                        [&](const LdaModel& m) -> Eigen::MatrixXd { return detail::lda_scores(m, x); },
                        [&](const SvmModel& m) -> Eigen::MatrixXd {
                          Eigen::MatrixXd s = x * m.weights.transpose();
                          s.rowwise() += m.bias.transpose();
                          return s;
                        },
                        [&](const ShallowConvModel& m) -> Eigen::MatrixXd { return m.net.probabilities(x); },
                    },
                    model.state());
}

std::vector<int> predict_features(const TrainedModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != static_cast<Eigen::Index>(model.channels()) * model.samples())
    throw Error(ErrorCode::ShapeMismatch, "input shape differs from the trained shape");
  if (const auto* knn = std::get_if<KnnModel>(&model.state())) return detail::predict_knn(*knn, x, model.n_classes());
  // Argmax over logits rather than softmax avoids rounding ties for the conv net.
  Eigen::MatrixXd scores;
  if (const auto* conv = std::get_if<ShallowConvModel>(&model.state()))
    scores = conv->net.logits(x);
  else
    scores = decision_scores(model, x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out[static_cast<std::size_t>(i)] = detail::argmax_lowest(scores.row(i).transpose());
  return out;
}

TrainedModel fit(const ClassifierSpec& spec, const TrialSet& trials, std::span<const int> labels,
                 const Normalizer& normalizer, int n_classes) {
  if (trials.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "trials and labels differ in length");
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "no training trials");
  return fit_features(spec, normalizer.transform(trials), labels, trials.channels(), trials.samples(), n_classes);
}

std::vector<int> predict(const TrainedModel& model, const TrialSet& trials, const Normalizer& normalizer) {
  if (trials.channels() != model.channels() || trials.samples() != model.samples())
    throw Error(ErrorCode::ShapeMismatch, "trial shape differs from the trained shape");
  if (trials.empty()) return {};
  return predict_features(model, normalizer.transform(trials));
}

double gradient_check(ShallowConvNet& net, const Eigen::MatrixXd& batch, std::span<const int> labels,
                      const GradientCheckOptions& options) {
  ConvParams analytic;
  net.loss(batch, labels, &analytic, options.corrupt_backward);
  std::vector<double> grads;
  analytic.for_each([&](double& g) { grads.push_back(g); });

  double worst = 0.0;
  std::size_t i = 0;
  net.params().for_each([&](double& p) {
    const double saved = p;
    p = saved + options.step;
    const double up = net.loss(batch, labels, nullptr);
    p = saved - options.step;
    const double down = net.loss(batch, labels, nullptr);
    p = saved;
    const double fd = (up - down) / (2.0 * options.step);
    const double ga = grads[i++];
    const double err = std::abs(ga - fd) / std::max({1.0, std::abs(ga), std::abs(fd)});
    worst = std::max(worst, err);
  });
  return worst;
}

double gradient_check(const ShallowConvSpec& spec, std::span<const TrialView> batch,
                      const GradientCheckOptions& options) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "gradient check needs a batch");
  const int channels = batch.front().channels;
  const int samples = batch.front().samples;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(channels) * samples);
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    if (t.channels != channels || t.samples != samples) throw Error(ErrorCode::ShapeMismatch, "batch shapes differ");
    for (std::size_t j = 0; j < t.data.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.data[j];
    labels.push_back(t.labels.category_id);
  }
  const int n_classes = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
  ShallowConvNet net(spec.resolve(channels, samples, n_classes), spec.seed);
  return gradient_check(net, x, labels, options);
}

}  // namespace exleak
