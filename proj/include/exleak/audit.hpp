#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "exleak/config.hpp"
#include "exleak/dataset.hpp"
#include "exleak/pseudocat.hpp"
#include "exleak/splits.hpp"
#include "exleak/stats.hpp"

namespace exleak {

enum class Verdict { LeakIndicated, NoLeakDetected };
std::string_view to_string(Verdict v) noexcept;

struct FoldRecord {
  Protocol protocol;
  std::string classifier;
  int subject = 0;
  int fold = 0;
  double accuracy = 0.0;
  std::size_t n_test = 0;
};

/// Pooled test for one (protocol, classifier) cell plus per-subject breakdowns.
struct CellResult {
  Protocol protocol;
  std::string classifier;
  TestResult pooled;
  std::map<int, TestResult> per_subject;
  Verdict verdict = Verdict::NoLeakDetected;
};

struct AuditReport {
  nlohmann::json config;
  nlohmann::json assignment;
  int n_pseudocategories = 0;
  double chance = 0.0;
  double alpha = 0.05;
  int bonferroni_m = 1;
  double alpha_adjusted = 0.05;
  Alternative alternative = Alternative::Greater;
  std::vector<Protocol> protocols;
  std::vector<std::string> classifiers;
  std::vector<int> subjects;
  std::map<Protocol, int> k;
  std::vector<FoldRecord> folds;  // ordered by protocol, classifier, subject, fold
  std::vector<CellResult> cells;  // ordered by protocol, classifier
  /// Per classifier: the leaky-protocol cell verdict, or the only protocol's
  /// verdict when the leaky protocol was not run.
  std::vector<std::pair<std::string, Verdict>> verdicts;
  nlohmann::json provenance;
  /// Split plans keyed by (subject, protocol); filled only on request.
  std::map<std::pair<int, Protocol>, SplitPlan> plans;

  std::vector<double> accuracies(Protocol p, const std::string& classifier) const;
  const CellResult* cell(Protocol p, const std::string& classifier) const;
  Verdict verdict(const std::string& classifier) const;
  bool any_leak() const;
};

struct DeltaRow {
  std::string classifier;
  double mean_leaky = 0.0;
  double mean_clean = 0.0;
  BootstrapInterval interval;
};

struct ComparisonReport {
  AuditReport audit;
  int resamples = 0;
  std::vector<DeltaRow> deltas;
};

/// Everything one fit touched; used to prove the pipeline never reads test
/// trials while fitting.
struct FitTrace {
  int subject = 0;
  Protocol protocol;
  int fold = 0;
  std::string classifier;
  std::vector<std::size_t> fit_reads;
  std::vector<std::size_t> test_indices;
};

class AuditObserver {
 public:
  virtual ~AuditObserver() = default;
  virtual void on_fit(const FitTrace& trace) = 0;
};

struct AuditOptions {
  int threads = 1;
  AuditObserver* observer = nullptr;
  bool keep_plans = false;
  std::string timestamp;  // recorded in provenance when non-empty
};

/// Loads or synthesizes the configured dataset.
Dataset materialize_dataset(const AuditConfig& cfg);
/// Builds the configured pseudocategory assignment for `dataset`.
PseudocategoryAssignment build_assignment(const AuditConfig& cfg, const Dataset& dataset);

AuditReport run_audit(const AuditConfig& cfg, const AuditOptions& options = {});
AuditReport run_audit(const AuditConfig& cfg, const Dataset& dataset, const AuditOptions& options = {});

ComparisonReport compare_protocols(const AuditConfig& cfg, const AuditOptions& options = {});
ComparisonReport compare_protocols(const AuditConfig& cfg, const Dataset& dataset, const AuditOptions& options = {});
/// Bootstrap deltas from an audit that ran both protocols.
ComparisonReport compare_protocols(AuditReport audit, int resamples, std::uint64_t seed);

}  // namespace exleak
