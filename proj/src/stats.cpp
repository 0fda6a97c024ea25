#include "exleak/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "exleak/error.hpp"
#include "exleak/rng.hpp"

namespace exleak {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kTolerance = 1e-14;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kTolerance) break;
  }
  return h;
}

// I_x(a,b) given both x and 1-x, so callers can pass an exactly computed
// complement instead of losing digits to 1 - x.
double incomplete_beta_split(double a, double b, double x, double one_minus_x) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

// P(T > |t|), i.e. the one-sided tail beyond |t|.
double upper_tail_abs(double t, double df) {
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double one_minus_x = t2 / (df + t2);
  return 0.5 * incomplete_beta_split(0.5 * df, 0.5, x, one_minus_x);
}

double clamp_open(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size())
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} predictions vs {} labels", predicted.size(), actual.size()));
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "accuracy of an empty list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::ConfigInvalid, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return incomplete_beta_split(a, b, x, 1.0 - x);
}

double t_sf(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t distribution needs df > 0");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return clamp_open(t > 0 ? 0.0 : 1.0);
  const double tail = upper_tail_abs(t, df);
  return clamp_open(t >= 0.0 ? tail : 1.0 - tail);
}

double t_cdf(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t distribution needs df > 0");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return clamp_open(t > 0 ? 1.0 : 0.0);
  const double tail = upper_tail_abs(t, df);
  return clamp_open(t >= 0.0 ? 1.0 - tail : tail);
}

TTestResult one_sample_ttest(std::span<const double> values, double mu0, Alternative alt) {
  const auto n = values.size();
  if (n < 2) throw Error(ErrorCode::DegenerateSample, fmt::format("need at least 2 values, got {}", n));
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateSample, "sample standard deviation is zero");
  TTestResult r;
  r.df = static_cast<int>(n - 1);
  r.t_statistic = (mean - mu0) / (sd / std::sqrt(static_cast<double>(n)));
  if (alt == Alternative::Greater)
    r.p_value = t_sf(r.t_statistic, r.df);
  else
    r.p_value = clamp_open(2.0 * upper_tail_abs(r.t_statistic, r.df));
  return r;
}

double bonferroni(double alpha, int m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::ConfigInvalid, "alpha must be in (0, 1)");
  if (m < 1) throw Error(ErrorCode::ConfigInvalid, "number of comparisons must be >= 1");
  return alpha / m;
}

TestResult test_against_chance(std::span<const double> values, double chance, double alpha_adjusted,
                               Alternative alt) {
  TestResult r;
  r.n = values.size();
  r.chance = chance;
  r.alpha_adjusted = alpha_adjusted;
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "no accuracy values to test");
  r.mean_accuracy = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  r.df = static_cast<int>(values.size()) - 1;
  try {
    const auto t = one_sample_ttest(values, chance, alt);
    r.t_statistic = t.t_statistic;
    r.p_value = t.p_value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateSample) throw;
    r.degenerate = true;
    const double diff = r.mean_accuracy - chance;
    if (diff == 0.0 || r.n < 2) {
      r.t_statistic = 0.0;
      r.p_value = alt == Alternative::Greater ? 0.5 : clamp_open(1.0);
    } else {
      r.t_statistic = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = alt == Alternative::Greater ? clamp_open(diff > 0 ? 0.0 : 1.0) : clamp_open(0.0);
    }
  }
  r.significant = r.p_value < alpha_adjusted;
  return r;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapInterval bootstrap_mean_difference(std::span<const double> a, std::span<const double> b, int resamples,
                                            std::uint64_t seed, double level) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap needs two non-empty samples");
  if (resamples < 1) throw Error(ErrorCode::ConfigInvalid, "bootstrap needs at least one resample");
  auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  BootstrapInterval out;
  out.delta = mean(a) - mean(b);
  CounterRng rng(derive_key(seed, {0x626f6f74}));
  std::vector<double> deltas(static_cast<std::size_t>(resamples));
  for (auto& d : deltas) {
    double sa = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sa += a[rng.below(a.size())];
    double sb = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) sb += b[rng.below(b.size())];
    d = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(deltas.begin(), deltas.end());
  const double tail = 0.5 * (1.0 - level);
  out.low = quantile_sorted(deltas, tail);
  out.high = quantile_sorted(deltas, 1.0 - tail);
  out.excludes_zero = out.low > 0.0 || out.high < 0.0;
  return out;
}

std::string_view to_string(Alternative alt) noexcept { return alt == Alternative::Greater ? "greater" : "two-sided"; }

Alternative alternative_from_string(std::string_view s) {
  if (s == "greater") return Alternative::Greater;
  if (s == "two-sided") return Alternative::TwoSided;
  throw Error(ErrorCode::ConfigInvalid, fmt::format("unknown alternative '{}'", s));
}

nlohmann::json to_json(const TestResult& r) {
  nlohmann::json t = std::isfinite(r.t_statistic) ? nlohmann::json(r.t_statistic)
                                                  : nlohmann::json(r.t_statistic > 0 ? "inf" : "-inf");
  return {{"n", r.n},
          {"mean_accuracy", r.mean_accuracy},
          {"chance", r.chance},
          {"t_statistic", std::move(t)},
          {"df", r.df},
          {"p_value", r.p_value},
          {"alpha_adjusted", r.alpha_adjusted},
          {"significant", r.significant},
          {"degenerate", r.degenerate}};
}

}  // namespace exleak
