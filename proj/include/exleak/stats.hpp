#pragma once

#include <cstdint>
#include <span>

#include <nlohmann/json.hpp>

namespace exleak {

enum class Alternative { Greater, TwoSided };

struct TTestResult {
  double t_statistic = 0.0;
  int df = 0;
  double p_value = 0.5;
};

/// Full one-sample test against chance, as embedded in audit reports.
struct TestResult {
  std::size_t n = 0;
  double mean_accuracy = 0.0;
  double chance = 0.0;
  double t_statistic = 0.0;  // +/-inf when every value is identical
  int df = 0;
  double p_value = 0.5;
  double alpha_adjusted = 0.05;
  bool significant = false;
  bool degenerate = false;
};

/// Fraction of positions where predicted equals actual.
double accuracy(std::span<const int> predicted, std::span<const int> actual);

/// Regularized incomplete beta I_x(a, b) by modified Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

/// Student-t CDF, clamped to the open interval (0, 1).
double t_cdf(double t, double df);
/// Upper tail 1 - CDF, computed directly so far tails keep relative precision.
double t_sf(double t, double df);

/// One-sample t-test of mean > mu0 (or two-sided). Throws DegenerateSample
/// when n < 2 or the sample standard deviation is zero.
TTestResult one_sample_ttest(std::span<const double> values, double mu0, Alternative alt = Alternative::Greater);
inline TTestResult one_sample_ttest_greater(std::span<const double> values, double mu0) {
  return one_sample_ttest(values, mu0, Alternative::Greater);
}

double bonferroni(double alpha, int m);

/// Like one_sample_ttest but never throws on zero variance: identical values
/// yield t = +/-inf and p at the numeric floor (or 0.5 when equal to mu0).
TestResult test_against_chance(std::span<const double> values, double chance, double alpha_adjusted,
                               Alternative alt = Alternative::Greater);

struct BootstrapInterval {
  double delta = 0.0;
  double low = 0.0;
  double high = 0.0;
  bool excludes_zero = false;
};

/// Percentile 95% interval for mean(a) - mean(b), resampling each collection
/// independently with replacement.
BootstrapInterval bootstrap_mean_difference(std::span<const double> a, std::span<const double> b, int resamples,
                                            std::uint64_t seed, double level = 0.95);

/// Linear-interpolation quantile of sorted data (q in [0, 1]).
double quantile_sorted(std::span<const double> sorted, double q);

std::string_view to_string(Alternative alt) noexcept;
Alternative alternative_from_string(std::string_view s);

nlohmann::json to_json(const TestResult& r);

}  // namespace exleak
