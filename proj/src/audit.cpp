#include "exleak/audit.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "exleak/classifiers.hpp"
#include "exleak/error.hpp"
#include "exleak/normalizer.hpp"
#include "exleak/rng.hpp"

namespace exleak {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c74;
constexpr std::uint64_t kItemStream = 0x6974656d;
constexpr std::uint64_t kAssignmentStream = 0x61736e67;
constexpr std::uint64_t kBootstrapStream = 0x62747370;

std::uint64_t protocol_code(Protocol p) { return p == Protocol::LeakyStratified ? 1 : 2; }

class VectorRecorder final : public AccessRecorder {
 public:
  void on_read(std::size_t index) override { reads.push_back(index); }
  std::vector<std::size_t> reads;
};

struct WorkItem {
  int subject;
  Protocol protocol;
  int fold;
  std::size_t classifier;
  const SplitPlan* plan;
};

std::map<int, int> exemplar_categories(const Dataset& d) {
  std::map<int, int> out;
  for (const auto& t : d.trial_table()) out.emplace(t.exemplar_id, t.category_id);
  return out;
}

}  // namespace

std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::LeakIndicated ? "LEAK-INDICATED" : "NO-LEAK-DETECTED";
}

std::vector<double> AuditReport::accuracies(Protocol p, const std::string& classifier) const {
  std::vector<double> out;
  for (const auto& f : folds)
    if (f.protocol == p && f.classifier == classifier) out.push_back(f.accuracy);
  return out;
}

const CellResult* AuditReport::cell(Protocol p, const std::string& classifier) const {
  for (const auto& c : cells)
    if (c.protocol == p && c.classifier == classifier) return &c;
  return nullptr;
}

Verdict AuditReport::verdict(const std::string& classifier) const {
  for (const auto& [name, v] : verdicts)
    if (name == classifier) return v;
  throw Error(ErrorCode::ConfigInvalid, fmt::format("no classifier named '{}'", classifier));
}

bool AuditReport::any_leak() const {
  return std::any_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.second == Verdict::LeakIndicated; });
}

Dataset materialize_dataset(const AuditConfig& cfg) {
  if (!cfg.dataset.is_synthetic()) return load_dataset(cfg.dataset.path);
  return generate_synthetic(cfg.dataset.synth_config());
}

PseudocategoryAssignment build_assignment(const AuditConfig& cfg, const Dataset& dataset) {
  const auto& a = cfg.assignment;
  const std::uint64_t seed = derive_key(cfg.seed, {kAssignmentStream, a.seed});
  switch (a.scheme) {
    case AssignmentScheme::File: {
      auto assignment = assignment_from_json(read_json_file(a.file), exemplar_categories(dataset));
      if (a.n_pseudocategories > 0 && assignment.n_pseudocategories != a.n_pseudocategories)
        throw Error(ErrorCode::ConfigInvalid, "assignment file disagrees with n_pseudocategories");
      return assignment;
    }
    case AssignmentScheme::OnePerCategory: {
      const auto groups = exemplars_by_category(dataset);
      int p = a.n_pseudocategories;
      if (p == 0) {
        if (groups.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no exemplars");
        p = static_cast<int>(groups.begin()->second.size());
      }
      return assign_one_per_category(groups, p, seed);
    }
    case AssignmentScheme::Composition: {
      const auto groups = exemplars_by_category(dataset);
      const int p = a.n_pseudocategories;
      if (p < 2) throw Error(ErrorCode::ConfigInvalid, "composition scheme needs n_pseudocategories >= 2");
      auto composition = a.composition;
      if (composition.empty()) {
        for (const auto& [c, list] : groups) {
          if (list.size() % static_cast<std::size_t>(p) != 0)
            throw Error(ErrorCode::CompositionMismatch,
                        fmt::format("category {} has {} exemplars, not divisible by {}", c, list.size(), p));
          composition[c] = static_cast<int>(list.size()) / p;
        }
      }
      return assign_by_composition(groups, p, composition, seed);
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown assignment scheme");
}

AuditReport run_audit(const AuditConfig& cfg, const AuditOptions& options) {
  validate(cfg);
  const Dataset dataset = materialize_dataset(cfg);
  return run_audit(cfg, dataset, options);
}

AuditReport run_audit(const AuditConfig& cfg, const Dataset& dataset, const AuditOptions& options) {
  validate(cfg);
  const auto assignment = build_assignment(cfg, dataset);
  const Dataset relabeled = relabel(dataset, assignment);
  const int n_classes = assignment.n_pseudocategories;

  std::vector<int> subjects = cfg.subjects.empty() ? dataset.present_subjects() : cfg.subjects;
  {
    const auto present = dataset.present_subjects();
    for (int s : subjects)
      if (!std::binary_search(present.begin(), present.end(), s))
        throw Error(ErrorCode::ConfigInvalid, fmt::format("subject {} has no trials", s));
  }
  if (subjects.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no trials");

  AuditReport report;
  report.config = to_json(cfg);
  report.assignment = to_json(assignment);
  report.n_pseudocategories = n_classes;
  report.chance = assignment.chance_accuracy;
  report.alpha = cfg.alpha;
  report.bonferroni_m = cfg.comparisons();
  report.alpha_adjusted = bonferroni(cfg.alpha, report.bonferroni_m);
  report.alternative = cfg.alternative;
  report.protocols = cfg.protocols;
  for (const auto& c : cfg.classifiers) report.classifiers.push_back(c.name);
  report.subjects = subjects;
  for (auto p : cfg.protocols) report.k[p] = cfg.folds_for(p);

  // Plans are built on the original labels so the clean splitter can
  // balance true categories; training always uses pseudolabels.
  std::map<std::pair<int, Protocol>, SplitPlan> plans;
  for (int s : subjects) {
    const auto trials = dataset.trials_of_subject(s);
    for (auto p : cfg.protocols) {
      const auto seed = derive_key(cfg.seed, {kSplitStream, static_cast<std::uint64_t>(s), protocol_code(p)});
      plans[{s, p}] = p == Protocol::LeakyStratified ? stratified_kfold_by_exemplar(dataset, trials, cfg.folds_for(p), seed)
                                                      : exemplar_disjoint_kfold(dataset, trials, cfg.folds_for(p), seed);
    }
  }

  std::vector<WorkItem> items;
  for (auto p : cfg.protocols)
    for (std::size_t c = 0; c < cfg.classifiers.size(); ++c)
      for (int s : subjects) {
        const auto& plan = plans.at({s, p});
        for (int f = 0; f < plan.k; ++f) items.push_back({s, p, f, c, &plan});
      }

  std::vector<FoldRecord> results(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::mutex observer_mutex;

  auto run_item = [&](std::size_t i) {
    const auto& item = items[i];
    const auto& fold = item.plan->folds[static_cast<std::size_t>(item.fold)];
    const auto& named = cfg.classifiers[item.classifier];
    const auto seed = derive_key(cfg.seed, {kItemStream, static_cast<std::uint64_t>(item.subject),
                                            protocol_code(item.protocol), static_cast<std::uint64_t>(item.fold),
                                            item.classifier});
    VectorRecorder recorder;
    AccessRecorder* rec = options.observer ? &recorder : nullptr;

    const TrialSet train(relabeled, fold.train, rec);
    std::vector<int> train_labels;
    train_labels.reserve(fold.train.size());
    for (auto idx : fold.train) train_labels.push_back(relabeled.labels(idx).category_id);
    const Normalizer normalizer = fit_normalizer(train);
    const TrainedModel model = fit(with_seed(named.spec, seed), train, train_labels, normalizer, n_classes);

    const TrialSet test(relabeled, fold.test);
    const auto predicted = predict(model, test, normalizer);
    std::vector<int> actual;
    actual.reserve(fold.test.size());
    for (auto idx : fold.test) actual.push_back(relabeled.labels(idx).category_id);

    results[i] = {item.protocol, named.name, item.subject, item.fold, accuracy(predicted, actual), fold.test.size()};
    if (options.observer) {
      FitTrace trace{item.subject, item.protocol, item.fold, named.name, std::move(recorder.reads), fold.test};
      const std::lock_guard lock(observer_mutex);
      options.observer->on_fit(trace);
    }
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(items.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) run_item(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size() && !failed; i = next++) {
          try {
            run_item(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    pool.clear();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  report.folds = std::move(results);

  for (auto p : cfg.protocols) {
    for (const auto& named : cfg.classifiers) {
      CellResult cell{p, named.name, {}, {}, Verdict::NoLeakDetected};
      const auto values = report.accuracies(p, named.name);
      cell.pooled = test_against_chance(values, report.chance, report.alpha_adjusted, cfg.alternative);
      for (int s : subjects) {
        std::vector<double> per;
        for (const auto& f : report.folds)
          if (f.protocol == p && f.classifier == named.name && f.subject == s) per.push_back(f.accuracy);
        cell.per_subject[s] = test_against_chance(per, report.chance, report.alpha_adjusted, cfg.alternative);
      }
      cell.verdict = cell.pooled.significant ? Verdict::LeakIndicated : Verdict::NoLeakDetected;
      report.cells.push_back(std::move(cell));
    }
  }
  const Protocol verdict_protocol = cfg.runs(Protocol::LeakyStratified) ? Protocol::LeakyStratified : cfg.protocols.front();
  for (const auto& named : cfg.classifiers)
    report.verdicts.emplace_back(named.name, report.cell(verdict_protocol, named.name)->verdict);

  nlohmann::json split_seeds = nlohmann::json::object();
  for (const auto& [key, plan] : plans)
    split_seeds[std::to_string(key.first)][std::string(to_string(key.second))] = plan.seed;
  report.provenance = {
      {"tool", "exleak"},
      {"version", EXLEAK_VERSION},
      {"format_version", 1},
      {"seed", cfg.seed},
      {"split_seeds", std::move(split_seeds)},
      {"dataset", {{"n_trials", dataset.size()}, {"n_channels", dataset.channels()}, {"n_samples", dataset.samples()},
                   {"source", cfg.dataset.is_synthetic() ? "synthetic:" + cfg.dataset.preset : cfg.dataset.path}}},
      {"verdict_protocol", to_string(verdict_protocol)},
  };
  if (!options.timestamp.empty()) report.provenance["generated_at"] = options.timestamp;
  if (options.keep_plans) report.plans = std::move(plans);
  return report;
}

ComparisonReport compare_protocols(AuditReport audit, int resamples, std::uint64_t seed) {
  if (std::find(audit.protocols.begin(), audit.protocols.end(), Protocol::LeakyStratified) == audit.protocols.end() ||
      std::find(audit.protocols.begin(), audit.protocols.end(), Protocol::CleanDisjoint) == audit.protocols.end())
    throw Error(ErrorCode::ConfigInvalid, "comparison needs both leaky-stratified and clean-disjoint protocols");
  ComparisonReport out;
  out.resamples = resamples;
  for (std::size_t c = 0; c < audit.classifiers.size(); ++c) {
    const auto& name = audit.classifiers[c];
    const auto leaky = audit.accuracies(Protocol::LeakyStratified, name);
    const auto clean = audit.accuracies(Protocol::CleanDisjoint, name);
    DeltaRow row;
    row.classifier = name;
    row.mean_leaky = std::accumulate(leaky.begin(), leaky.end(), 0.0) / static_cast<double>(leaky.size());
    row.mean_clean = std::accumulate(clean.begin(), clean.end(), 0.0) / static_cast<double>(clean.size());
    row.interval = bootstrap_mean_difference(leaky, clean, resamples, derive_key(seed, {kBootstrapStream, c}));
    out.deltas.push_back(row);
  }
  out.audit = std::move(audit);
  return out;
}

ComparisonReport compare_protocols(const AuditConfig& cfg, const AuditOptions& options) {
  if (!cfg.runs(Protocol::LeakyStratified) || !cfg.runs(Protocol::CleanDisjoint))
    throw Error(ErrorCode::ConfigInvalid, "comparison needs both leaky-stratified and clean-disjoint protocols");
  return compare_protocols(run_audit(cfg, options), cfg.bootstrap_resamples, cfg.seed);
}

ComparisonReport compare_protocols(const AuditConfig& cfg, const Dataset& dataset, const AuditOptions& options) {
  if (!cfg.runs(Protocol::LeakyStratified) || !cfg.runs(Protocol::CleanDisjoint))
    throw Error(ErrorCode::ConfigInvalid, "comparison needs both leaky-stratified and clean-disjoint protocols");
  return compare_protocols(run_audit(cfg, dataset, options), cfg.bootstrap_resamples, cfg.seed);
}

}  // namespace exleak
