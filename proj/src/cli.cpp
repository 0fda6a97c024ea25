#include "exleak/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "exleak/audit.hpp"
#include "exleak/config.hpp"
#include "exleak/dataset.hpp"
#include "exleak/error.hpp"
#include "exleak/report.hpp"
#include "exleak/splits.hpp"
#include "exleak/synth.hpp"

namespace exleak {

namespace {

constexpr const char* kThreadsEnv = "EXEMPLAR_LEAK_THREADS";

struct CommonOptions {
  std::string config;
  std::string preset;
  std::vector<std::string> overrides;
  std::string output;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int verbosity = 0;
  bool json = false;
};

struct AuditOptionsCli {
  std::string dataset;
  std::string assignment;
  std::string formats = "json,csv,svg";
  int threads = 0;
  bool fail_on_leak = false;
  bool save_splits = false;
  int resamples = 0;
};

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::UnknownPreset:
    case ErrorCode::InvalidK:
    case ErrorCode::UnbalancedInput:
    case ErrorCode::CompositionMismatch:
    case ErrorCode::UnmappedExemplar:
      return kExitConfig;
    case ErrorCode::MissingFile:
    case ErrorCode::MalformedManifest:
    case ErrorCode::PayloadSizeMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::IoError:
      return kExitIo;
    default:
      return kExitPipeline;
  }
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv(kThreadsEnv); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw Error(ErrorCode::ConfigInvalid, fmt::format("{}='{}' is not a positive integer", kThreadsEnv, env));
    return static_cast<int>(v);
  }
  return 1;
}

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& config_help) {
  cmd->add_option("-c,--config", o.config, config_help)->check(CLI::ExistingFile);
  cmd->add_option("-p,--preset", o.preset, "Synthetic preset: kaneshiro-like or gifford-like");
  cmd->add_option("--set", o.overrides, "Override a config value with a dotted path, e.g. --set k.leaky-stratified=6")
      ->type_name("KEY=VALUE")
      ->take_all();
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)")->each([&o](const std::string&) {
    o.seed_given = true;
  });
  cmd->add_flag("-v,--verbose", o.verbosity, "Print progress to standard error (repeat for more)");
  cmd->add_flag("--json", o.json, "Print the machine-readable result to standard output");
}

void add_audit_flags(CLI::App* cmd, CommonOptions& common, AuditOptionsCli& a, bool compare) {
  add_common(cmd, common, "Audit config JSON file");
  cmd->add_option("-d,--dataset", a.dataset, "Dataset manifest.json to audit instead of a synthetic preset");
  cmd->add_option("-a,--assignment", a.assignment, "Pseudocategory assignment JSON file");
  cmd->add_option("-o,--output", common.output, "Output directory for report files")->default_val("exleak-report");
  cmd->add_option("-f,--formats", a.formats, "Comma-separated report formats: json,csv,svg")->default_val(a.formats);
  cmd->add_option("-t,--threads", a.threads,
                  fmt::format("Worker threads (default: ${} or 1); results do not depend on it", kThreadsEnv))
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--save-splits", a.save_splits, "Include every split plan in report.json");
  if (compare) {
    cmd->add_option("--resamples", a.resamples, "Bootstrap resamples (overrides the config)")
        ->check(CLI::PositiveNumber);
  } else {
    cmd->add_flag("--fail-on-leak", a.fail_on_leak, "Exit with status 1 when any verdict is LEAK-INDICATED");
  }
}

AuditConfig build_audit_config(const CommonOptions& common, const AuditOptionsCli& a) {
  nlohmann::json doc = common.config.empty() ? nlohmann::json::object() : read_json_file(common.config);
  if (!doc.is_object()) throw Error(ErrorCode::ConfigInvalid, "audit config must be a JSON object");
  if (!common.preset.empty() && !a.dataset.empty())
    throw Error(ErrorCode::ConfigInvalid, "--preset and --dataset are mutually exclusive");
  if (!common.preset.empty()) doc["dataset"] = {{"preset", common.preset}};
  if (!a.dataset.empty()) doc["dataset"] = {{"path", a.dataset}};
  if (!a.assignment.empty()) doc["assignment"]["file"] = a.assignment;
  if (common.seed_given) doc["seed"] = common.seed;
  if (a.resamples > 0) doc["bootstrap_resamples"] = a.resamples;
  for (const auto& o : common.overrides) apply_override(doc, o);
  if (!doc.contains("dataset")) throw Error(ErrorCode::ConfigInvalid, "no dataset: pass --config, --preset or --dataset");
  auto cfg = audit_config_from_json(doc);
  validate(cfg);
  return cfg;
}

class Progress final : public AuditObserver {
 public:
  Progress(std::ostream& err, std::size_t total) : err_(err), total_(total) {}
  void on_fit(const FitTrace& t) override {
    ++done_;
    err_ << fmt::format("[{}/{}] subject {} {} fold {} {}\n", done_, total_, t.subject, to_string(t.protocol), t.fold,
                        t.classifier);
  }

 private:
  std::ostream& err_;
  std::size_t total_;
  std::size_t done_ = 0;
};

std::size_t count_items(const AuditConfig& cfg, const Dataset& d) {
  const auto subjects = cfg.subjects.empty() ? d.present_subjects().size() : cfg.subjects.size();
  std::size_t folds = 0;
  for (auto p : cfg.protocols) folds += static_cast<std::size_t>(cfg.folds_for(p));
  return subjects * folds * cfg.classifiers.size();
}

int cmd_synth(const CommonOptions& o, std::ostream& out, std::ostream& err) {
  nlohmann::json doc = o.config.empty() ? nlohmann::json::object() : read_json_file(o.config);
  if (!doc.is_object()) throw Error(ErrorCode::ConfigInvalid, "synth config must be a JSON object");
  for (const auto& s : o.overrides) apply_override(doc, s);
  std::string preset_name = o.preset;
  if (doc.contains("preset")) {
    if (preset_name.empty()) preset_name = doc.at("preset").get<std::string>();
    doc.erase("preset");
  }
  if (o.seed_given) doc["seed"] = o.seed;
  const SynthConfig cfg = synth_config_from_json(doc, preset_name.empty() ? SynthConfig{} : preset(preset_name));
  validate(cfg);
  if (o.verbosity > 0) err << "synth: generating " << to_json(cfg).dump() << "\n";

  const Dataset d = generate_synthetic(cfg);
  const auto manifest = save_dataset(d, o.output);
  const auto report = validate_dataset(d);

  if (o.json) {
    out << dump_canonical({{"manifest", manifest.string()}, {"config", to_json(cfg)}, {"summary", to_json(report)}});
    return kExitOk;
  }
  std::map<int, std::size_t> per_category;
  for (const auto& t : d.trial_table()) ++per_category[t.category_id];
  const auto [min_it, max_it] = std::minmax_element(report.trials_per_exemplar.begin(), report.trials_per_exemplar.end(),
                                                    [](const auto& a, const auto& b) { return a.second < b.second; });
  out << fmt::format("wrote {} ({} trials, {} subjects, {} exemplars, {} categories, {}x{})\n", manifest.string(),
                     d.size(), report.trials_per_subject.size(), report.trials_per_exemplar.size(),
                     report.exemplars_per_category.size(), d.channels(), d.samples());
  out << fmt::format("trials per exemplar: {}..{}\n", min_it->second, max_it->second);
  for (const auto& [c, n] : per_category)
    out << fmt::format("  {:<14} exemplars {:>4}  trials {:>7}\n", d.manifest().category_names.at(c),
                       report.exemplars_per_category.at(c), n);
  return kExitOk;
}

int cmd_audit(const CommonOptions& o, const AuditOptionsCli& a, bool compare, std::ostream& out, std::ostream& err) {
  const auto cfg = build_audit_config(o, a);
  const auto formats = parse_formats(a.formats);
  if (compare && (!cfg.runs(Protocol::LeakyStratified) || !cfg.runs(Protocol::CleanDisjoint)))
    throw Error(ErrorCode::ConfigInvalid, "compare needs both leaky-stratified and clean-disjoint protocols");

  const auto started = std::chrono::steady_clock::now();
  const Dataset dataset = materialize_dataset(cfg);
  AuditOptions options;
  options.threads = resolve_threads(a.threads);
  options.keep_plans = a.save_splits;
  Progress progress(err, count_items(cfg, dataset));
  if (o.verbosity > 1) options.observer = &progress;
  if (o.verbosity > 0)
    err << fmt::format("{}: {} trials, {} work items, {} thread(s)\n", compare ? "compare" : "audit", dataset.size(),
                       count_items(cfg, dataset), options.threads);

  int status = kExitOk;
  std::vector<std::filesystem::path> written;
  if (compare) {
    const auto report = compare_protocols(cfg, dataset, options);
    written = emit_report(report, o.output, formats);
    if (o.json) {
      out << dump_canonical(to_json(report));
    } else {
      out << verdict_table(report.audit) << "\n" << delta_table(report);
    }
  } else {
    const auto report = run_audit(cfg, dataset, options);
    written = emit_report(report, o.output, formats);
    if (o.json) {
      out << dump_canonical(to_json(report));
    } else {
      out << verdict_table(report);
    }
    if (a.fail_on_leak && report.any_leak()) status = kExitLeak;
  }
  if (o.verbosity > 0) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    for (const auto& p : written) err << "wrote " << p.string() << "\n";
    err << fmt::format("done in {:.1f} s\n", elapsed.count());
  }
  return status;
}

int cmd_validate(const std::string& manifest, const std::string& splits, bool json, std::ostream& out) {
  const Dataset d = load_dataset(manifest);
  const auto report = validate_dataset(d);
  nlohmann::json result = {{"dataset", to_json(report)}};
  bool ok = !report.has_flags();
  if (!splits.empty()) {
    const auto plan = split_plan_from_json(read_json_file(splits));
    const auto sv = validate_split(plan, d);
    result["split"] = to_json(sv);
    ok = ok && sv.valid();
  }
  result["ok"] = ok;
  if (json) {
    out << dump_canonical(result);
  } else {
    out << fmt::format("{} trials, {} exemplars, {} categories, {} subjects\n", d.size(),
                       report.trials_per_exemplar.size(), report.exemplars_per_category.size(),
                       report.trials_per_subject.size());
    for (const auto& [e, cats] : report.inconsistent_exemplars)
      out << fmt::format("exemplar {} carries categories {}\n", e, fmt::join(cats, ","));
    if (result.contains("split")) {
      const auto& s = result["split"];
      out << fmt::format("split: covers={} partitions={} disjoint={} fold_count_matches={}\n",
                         s.value("covers", false), s.value("partitions", false), s.value("disjoint", false),
                         s.value("fold_count_matches", false));
    }
    out << (ok ? "OK\n" : "PROBLEMS FOUND\n");
  }
  return ok ? kExitOk : kExitLeak;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audit EEG decoding pipelines for repeated-exemplar leakage", "exleak"};
  app.set_version_flag("--version", EXLEAK_VERSION);
  app.require_subcommand(1);
  app.fallthrough(false);

  CommonOptions synth_common, audit_common, compare_common;
  AuditOptionsCli audit_opts, compare_opts;
  bool validate_json = false;
  std::string validate_splits;
  std::string validate_dataset_path;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (manifest.json + data.f32)");
  add_common(synth, synth_common, "Synth config JSON file (may contain \"preset\")");
  synth->add_option("-o,--output", synth_common.output, "Output directory")->required();

  auto* audit = app.add_subcommand("audit", "Run the pseudocategory leakage audit and emit reports");
  add_audit_flags(audit, audit_common, audit_opts, false);

  auto* compare = app.add_subcommand("compare", "Compare leaky and exemplar-disjoint protocols with bootstrap deltas");
  add_audit_flags(compare, compare_common, compare_opts, true);

  auto* validate_cmd = app.add_subcommand("validate", "Check a dataset (and optionally a split plan) for consistency");
  validate_cmd->add_option("-d,--dataset", validate_dataset_path, "Dataset manifest.json")->required();
  validate_cmd->add_option("-s,--splits", validate_splits, "Split plan JSON to check against the dataset");
  validate_cmd->add_flag("--json", validate_json, "Print the machine-readable result to standard output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_common, out, err);
    if (audit->parsed()) return cmd_audit(audit_common, audit_opts, false, out, err);
    if (compare->parsed()) return cmd_audit(compare_common, compare_opts, true, out, err);
    return cmd_validate(validate_dataset_path, validate_splits, validate_json, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: ConfigInvalid: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace exleak
