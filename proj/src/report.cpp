#include "exleak/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "exleak/error.hpp"

namespace exleak {

namespace {

struct BoxStats {
  double q1 = 0, median = 0, q3 = 0, whisker_low = 0, whisker_high = 0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  return b;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}' for writing", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoError, fmt::format("failed writing '{}'", path.string()));
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorCode::IoError, fmt::format("cannot create output directory '{}'", dir.string()));
}

bool wants(const std::vector<ReportFormat>& formats, ReportFormat f) {
  return std::find(formats.begin(), formats.end(), f) != formats.end();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<std::filesystem::path> emit_common(const AuditReport& audit, const nlohmann::json& doc,
                                               const std::filesystem::path& directory,
                                               const std::vector<ReportFormat>& formats) {
  ensure_directory(directory);
  std::vector<std::filesystem::path> written;
  if (wants(formats, ReportFormat::Json)) {
    written.push_back(directory / "report.json");
    write_file(written.back(), dump_canonical(doc));
  }
  if (wants(formats, ReportFormat::Csv)) {
    written.push_back(directory / "accuracies.csv");
    write_file(written.back(), accuracies_csv(audit));
  }
  if (wants(formats, ReportFormat::Svg)) {
    for (auto p : audit.protocols) {
      written.push_back(directory / fmt::format("boxplot_{}.svg", to_string(p)));
      write_file(written.back(), boxplot_svg(audit, p));
    }
  }
  return written;
}

}  // namespace

std::vector<ReportFormat> parse_formats(std::string_view list) {
  std::vector<ReportFormat> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto end = std::min(list.find(',', start), list.size());
    const auto item = list.substr(start, end - start);
    ReportFormat f;
    if (item == "json") {
      f = ReportFormat::Json;
    } else if (item == "csv") {
      f = ReportFormat::Csv;
    } else if (item == "svg") {
      f = ReportFormat::Svg;
    } else {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("unknown report format '{}' (json, csv, svg)", item));
    }
    if (!wants(out, f)) out.push_back(f);
    start = end + 1;
  }
  return out;
}

nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"protocol", to_string(f.protocol)},
                     {"classifier", f.classifier},
                     {"subject", f.subject},
                     {"fold", f.fold},
                     {"accuracy", f.accuracy},
                     {"n_test", f.n_test}});

  nlohmann::json results = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json per_subject = nlohmann::json::object();
    for (const auto& [s, t] : c.per_subject) per_subject[std::to_string(s)] = to_json(t);
    results.push_back({{"protocol", to_string(c.protocol)},
                       {"classifier", c.classifier},
                       {"grand_mean", mean_of(r.accuracies(c.protocol, c.classifier))},
                       {"test", to_json(c.pooled)},
                       {"per_subject", std::move(per_subject)},
                       {"verdict", to_string(c.verdict)}});
  }

  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& [name, v] : r.verdicts) verdicts[name] = to_string(v);
  nlohmann::json protocols = nlohmann::json::array();
  for (auto p : r.protocols) protocols.push_back(to_string(p));
  nlohmann::json k = nlohmann::json::object();
  for (const auto& [p, folds_k] : r.k) k[std::string(to_string(p))] = folds_k;

  nlohmann::json j = {
      {"kind", "audit"},
      {"config", r.config},
      {"assignment", r.assignment},
      {"n_pseudocategories", r.n_pseudocategories},
      {"chance", r.chance},
      {"alpha", r.alpha},
      {"bonferroni_m", r.bonferroni_m},
      {"alpha_adjusted", r.alpha_adjusted},
      {"alternative", to_string(r.alternative)},
      {"protocols", std::move(protocols)},
      {"classifiers", r.classifiers},
      {"subjects", r.subjects},
      {"k", std::move(k)},
      {"folds", std::move(folds)},
      {"results", std::move(results)},
      {"verdicts", std::move(verdicts)},
      {"leak_indicated", r.any_leak()},
      {"provenance", r.provenance},
  };
  if (!r.plans.empty()) {
    nlohmann::json plans = nlohmann::json::array();
    for (const auto& [key, plan] : r.plans) {
      auto entry = to_json(plan);
      entry["subject"] = key.first;
      plans.push_back(std::move(entry));
    }
    j["splits"] = std::move(plans);
  }
  return j;
}

nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json deltas = nlohmann::json::array();
  for (const auto& d : r.deltas)
    deltas.push_back({{"classifier", d.classifier},
                      {"mean_leaky", d.mean_leaky},
                      {"mean_clean", d.mean_clean},
                      {"delta", d.interval.delta},
                      {"ci_low", d.interval.low},
                      {"ci_high", d.interval.high},
                      {"excludes_zero", d.interval.excludes_zero}});
  return {{"kind", "comparison"},
          {"audit", to_json(r.audit)},
          {"bootstrap_resamples", r.resamples},
          {"confidence_level", 0.95},
          {"deltas", std::move(deltas)}};
}

std::string dump_canonical(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string accuracies_csv(const AuditReport& r) {
  std::string out = "protocol,classifier,subject,fold,accuracy\n";
  for (const auto& f : r.folds)
    out += fmt::format("{},{},{},{},{}\n", to_string(f.protocol), f.classifier, f.subject, f.fold, f.accuracy);
  return out;
}

std::string boxplot_svg(const AuditReport& r, Protocol protocol) {
  const double box_w = 60, slot = 110, left = 70, right = 30, top = 50, bottom = 60, plot_h = 300;
  const double width = left + right + slot * static_cast<double>(std::max<std::size_t>(1, r.classifiers.size()));
  const double height = top + plot_h + bottom;

  std::vector<std::vector<double>> groups;
  double lo = r.chance, hi = r.chance;
  for (const auto& name : r.classifiers) {
    groups.push_back(r.accuracies(protocol, name));
    for (double v : groups.back()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  double pad = 0.08 * (hi - lo);
  if (pad <= 0) pad = 0.05;
  lo = std::max(0.0, lo - pad);
  hi = std::min(1.0, hi + pad);
  if (hi <= lo) hi = lo + 0.1;
  auto y = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::string s;
  s += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} {1:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height);
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", width, height);
  s += fmt::format("<text x=\"{:.1f}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{} fold accuracies</text>\n",
                   width / 2, xml_escape(to_string(protocol)));
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", left, top,
                   top + plot_h);
  for (int i = 0; i <= 5; ++i) {
    const double v = lo + (hi - lo) * i / 5.0;
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{2:.2f}\" x2=\"{1:.1f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", left - 4,
                     left, y(v));
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.3f}</text>\n", left - 7, y(v) + 4, v);
  }
  s += fmt::format(
      "<line class=\"chance\" x1=\"{0:.1f}\" y1=\"{2:.2f}\" x2=\"{1:.1f}\" y2=\"{2:.2f}\" stroke=\"red\" "
      "stroke-dasharray=\"6,4\"/>\n",
      left, width - right, y(r.chance));
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" text-anchor=\"end\" fill=\"red\">chance {:.4f}</text>\n",
                   width - right, y(r.chance) - 4, r.chance);

  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", cx, top + plot_h + 20,
                     xml_escape(r.classifiers[i]));
    if (groups[i].empty()) continue;
    const auto b = box_stats(groups[i]);
    s += fmt::format("<g class=\"box\" data-classifier=\"{}\">\n", xml_escape(r.classifiers[i]));
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.2f}\" x2=\"{0:.1f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", cx,
                     y(b.whisker_high), y(b.q3));
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.2f}\" x2=\"{0:.1f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", cx,
                     y(b.q1), y(b.whisker_low));
    for (double w : {b.whisker_low, b.whisker_high})
      s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{2:.2f}\" x2=\"{1:.1f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n",
                       cx - box_w / 4, cx + box_w / 4, y(w));
    s += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.1f}\" height=\"{:.2f}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
        cx - box_w / 2, y(b.q3), box_w, y(b.q1) - y(b.q3));
    s += fmt::format(
        "<line class=\"median\" x1=\"{0:.1f}\" y1=\"{2:.2f}\" x2=\"{1:.1f}\" y2=\"{2:.2f}\" stroke=\"black\" "
        "stroke-width=\"2\"/>\n",
        cx - box_w / 2, cx + box_w / 2, y(b.median));
    for (double o : b.outliers)
      s += fmt::format("<circle class=\"outlier\" cx=\"{:.1f}\" cy=\"{:.2f}\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n",
                       cx, y(o));
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> emit_report(const AuditReport& report, const std::filesystem::path& directory,
                                               const std::vector<ReportFormat>& formats) {
  return emit_common(report, to_json(report), directory, formats);
}

std::vector<std::filesystem::path> emit_report(const ComparisonReport& report, const std::filesystem::path& directory,
                                               const std::vector<ReportFormat>& formats) {
  return emit_common(report.audit, to_json(report), directory, formats);
}

std::string verdict_table(const AuditReport& r) {
  std::string out = fmt::format("{:<14} {:<17} {:>9} {:>9} {:>11} {:>11}  {}\n", "classifier", "protocol", "mean_acc",
                                "chance", "p", "alpha_adj", "verdict");
  for (const auto& c : r.cells) {
    out += fmt::format("{:<14} {:<17} {:>9.4f} {:>9.4f} {:>11.3e} {:>11.3e}  {}\n", c.classifier, to_string(c.protocol),
                       c.pooled.mean_accuracy, r.chance, c.pooled.p_value, r.alpha_adjusted,
                       c.pooled.significant ? "LEAK-INDICATED" : "NO-LEAK-DETECTED");
  }
  return out;
}

std::string delta_table(const ComparisonReport& r) {
  std::string out = fmt::format("{:<14} {:>9} {:>9} {:>9} {:>20}  {}\n", "classifier", "leaky", "clean", "delta",
                                "95% interval", "excludes_0");
  for (const auto& d : r.deltas) {
    out += fmt::format("{:<14} {:>9.4f} {:>9.4f} {:>+9.4f} {:>20}  {}\n", d.classifier, d.mean_leaky, d.mean_clean,
                       d.interval.delta, fmt::format("[{:+.4f}, {:+.4f}]", d.interval.low, d.interval.high),
                       d.interval.excludes_zero ? "yes" : "no");
  }
  return out;
}

}  // namespace exleak
