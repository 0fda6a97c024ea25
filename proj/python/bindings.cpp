#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <set>
#include <sstream>

#include "exleak/audit.hpp"
#include "exleak/cli.hpp"
#include "exleak/config.hpp"
#include "exleak/dataset.hpp"
#include "exleak/error.hpp"
#include "exleak/pseudocat.hpp"
#include "exleak/report.hpp"
#include "exleak/splits.hpp"
#include "exleak/stats.hpp"
#include "exleak/synth.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package wraps these with
// json.loads / json.dumps.
std::string dump(const json& j) { return j.dump(); }

exleak::SynthConfig synth_from(const std::string& text) {
  auto doc = json::parse(text);
  exleak::SynthConfig base;
  if (doc.contains("preset")) {
    base = exleak::preset(doc.at("preset").get<std::string>());
    doc.erase("preset");
  }
  return exleak::synth_config_from_json(doc, base);
}

py::array_t<float> trial_data(const exleak::Dataset& d) {
  const auto n = static_cast<py::ssize_t>(d.size());
  py::array_t<float> out({n, static_cast<py::ssize_t>(d.channels()), static_cast<py::ssize_t>(d.samples())});
  const auto payload = d.payload();
  std::copy(payload.begin(), payload.end(), out.mutable_data());
  return out;
}

py::array_t<int> trial_labels(const exleak::Dataset& d) {
  py::array_t<int> out({static_cast<py::ssize_t>(d.size()), py::ssize_t{3}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& t = d.labels(i);
    const auto r = static_cast<py::ssize_t>(i);
    v(r, 0) = t.exemplar_id;
    v(r, 1) = t.category_id;
    v(r, 2) = t.subject_id;
  }
  return out;
}

exleak::Dataset dataset_from_arrays(py::array_t<float, py::array::c_style | py::array::forcecast> data,
                                    py::array_t<int, py::array::c_style | py::array::forcecast> labels,
                                    std::vector<std::string> exemplar_names, std::vector<std::string> category_names) {
  if (data.ndim() != 3) throw exleak::Error(exleak::ErrorCode::ShapeMismatch, "data must be (trials, channels, samples)");
  if (labels.ndim() != 2 || labels.shape(1) != 3 || labels.shape(0) != data.shape(0))
    throw exleak::Error(exleak::ErrorCode::ShapeMismatch, "labels must be (trials, 3): exemplar, category, subject");
  exleak::DatasetManifest m;
  m.n_trials = data.shape(0);
  m.n_channels = data.shape(1);
  m.n_samples = data.shape(2);
  m.exemplar_names = std::move(exemplar_names);
  m.category_names = std::move(category_names);
  std::vector<exleak::TrialLabels> table(static_cast<std::size_t>(m.n_trials));
  auto l = labels.unchecked<2>();
  std::set<int> subjects;
  for (py::ssize_t i = 0; i < labels.shape(0); ++i) {
    table[static_cast<std::size_t>(i)] = {l(i, 0), l(i, 1), l(i, 2)};
    subjects.insert(l(i, 2));
  }
  m.subject_ids.assign(subjects.begin(), subjects.end());
  std::vector<float> payload(data.data(), data.data() + data.size());
  return {std::move(m), std::move(payload), std::move(table)};
}

exleak::PseudocategoryAssignment assignment_from(const exleak::Dataset& d, const std::string& text) {
  std::map<int, int> categories;
  for (const auto& t : d.trial_table()) categories.emplace(t.exemplar_id, t.category_id);
  return exleak::assignment_from_json(json::parse(text), categories);
}

exleak::AuditOptions options_for(int threads) {
  exleak::AuditOptions o;
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(_exleak, m) {
  m.doc() = "Repeated-exemplar leakage audit toolkit (C++ core)";
  m.attr("__version__") = EXLEAK_VERSION;

  // Messages are prefixed with the error code name, e.g. "InvalidK: ...".
  py::register_exception<exleak::Error>(m, "ExleakError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<exleak::Dataset>(m, "Dataset")
      .def_property_readonly("n_trials", &exleak::Dataset::size)
      .def_property_readonly("n_channels", &exleak::Dataset::channels)
      .def_property_readonly("n_samples", &exleak::Dataset::samples)
      .def_property_readonly("data", &trial_data, "Copy of the payload as (trials, channels, samples) float32")
      .def_property_readonly("labels", &trial_labels, "(trials, 3) int array: exemplar, category, subject")
      .def("manifest_json",
           [](const exleak::Dataset& d) { return dump(exleak::manifest_to_json(d.manifest(), d.trial_table())); })
      .def("__len__", &exleak::Dataset::size);

  m.def("dataset_from_arrays", &dataset_from_arrays, py::arg("data"), py::arg("labels"), py::arg("exemplar_names"),
        py::arg("category_names"));
  m.def("load_dataset", [](const std::string& path) { return exleak::load_dataset(path); }, py::arg("manifest_path"));
  m.def("save_dataset", [](const exleak::Dataset& d, const std::string& dir) { return exleak::save_dataset(d, dir).string(); },
        py::arg("dataset"), py::arg("directory"));
  m.def("validate_dataset", [](const exleak::Dataset& d) { return dump(exleak::to_json(exleak::validate_dataset(d))); });

  m.def("preset_json", [](const std::string& name) { return dump(exleak::to_json(exleak::preset(name))); });
  m.def("generate_synthetic_json", [](const std::string& cfg) { return exleak::generate_synthetic(synth_from(cfg)); },
        py::call_guard<py::gil_scoped_release>());

  m.def("assign_one_per_category_json", [](const exleak::Dataset& d, int p, std::uint64_t seed) {
    return dump(exleak::to_json(exleak::assign_one_per_category(exleak::exemplars_by_category(d), p, seed)));
  });
  m.def("assign_by_composition_json",
        [](const exleak::Dataset& d, int p, const std::map<int, int>& composition, std::uint64_t seed) {
          return dump(exleak::to_json(
              exleak::assign_by_composition(exleak::exemplars_by_category(d), p, composition, seed)));
        });
  m.def("relabel_json", [](const exleak::Dataset& d, const std::string& assignment) {
    return exleak::relabel(d, assignment_from(d, assignment));
  });

  m.def("stratified_kfold_by_exemplar_json", [](const exleak::Dataset& d, int k, std::uint64_t seed) {
    return dump(exleak::to_json(exleak::stratified_kfold_by_exemplar(d, k, seed)));
  });
  m.def("exemplar_disjoint_kfold_json", [](const exleak::Dataset& d, int k, std::uint64_t seed) {
    return dump(exleak::to_json(exleak::exemplar_disjoint_kfold(d, k, seed)));
  });
  m.def("validate_split_json", [](const std::string& plan, const exleak::Dataset& d) {
    return dump(exleak::to_json(exleak::validate_split(exleak::split_plan_from_json(json::parse(plan)), d)));
  });

  m.def("t_cdf", &exleak::t_cdf, py::arg("t"), py::arg("df"));
  m.def("t_sf", &exleak::t_sf, py::arg("t"), py::arg("df"));
  m.def("incomplete_beta", &exleak::incomplete_beta, py::arg("a"), py::arg("b"), py::arg("x"));
  m.def("bonferroni", &exleak::bonferroni, py::arg("alpha"), py::arg("m"));
  m.def(
      "one_sample_ttest",
      [](const std::vector<double>& values, double mu0, const std::string& alternative) {
        const auto r = exleak::one_sample_ttest(values, mu0, exleak::alternative_from_string(alternative));
        return py::make_tuple(r.t_statistic, r.df, r.p_value);
      },
      py::arg("values"), py::arg("mu0"), py::arg("alternative") = "greater");
  m.def(
      "bootstrap_mean_difference",
      [](const std::vector<double>& a, const std::vector<double>& b, int resamples, std::uint64_t seed) {
        const auto r = exleak::bootstrap_mean_difference(a, b, resamples, seed);
        return py::make_tuple(r.delta, r.low, r.high, r.excludes_zero);
      },
      py::arg("a"), py::arg("b"), py::arg("resamples"), py::arg("seed"));

  m.def(
      "run_audit_json",
      [](const std::string& cfg, int threads, const std::string& output_dir, const std::string& formats) {
        exleak::AuditReport report;
        {
          py::gil_scoped_release release;
          report = exleak::run_audit(exleak::audit_config_from_json(json::parse(cfg)), options_for(threads));
          if (!output_dir.empty()) exleak::emit_report(report, output_dir, exleak::parse_formats(formats));
        }
        return exleak::dump_canonical(exleak::to_json(report));
      },
      py::arg("config"), py::arg("threads") = 1, py::arg("output_dir") = "", py::arg("formats") = "json");
  m.def(
      "compare_protocols_json",
      [](const std::string& cfg, int threads, const std::string& output_dir, const std::string& formats) {
        exleak::ComparisonReport report;
        {
          py::gil_scoped_release release;
          report = exleak::compare_protocols(exleak::audit_config_from_json(json::parse(cfg)), options_for(threads));
          if (!output_dir.empty()) exleak::emit_report(report, output_dir, exleak::parse_formats(formats));
        }
        return exleak::dump_canonical(exleak::to_json(report));
      },
      py::arg("config"), py::arg("threads") = 1, py::arg("output_dir") = "", py::arg("formats") = "json");

  m.def(
      "main",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        std::vector<std::string> argv{"exleak"};
        argv.insert(argv.end(), args.begin(), args.end());
        int code = 0;
        {
          py::gil_scoped_release release;
          code = exleak::run_cli(argv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool; returns (exit_code, stdout, stderr).");
}
