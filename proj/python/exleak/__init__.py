"""Repeated-exemplar leakage audit toolkit.

Thin Python layer over the C++ core. Structured values (configs, plans,
assignments, reports) are plain dicts in the same JSON schema the CLI uses.
"""

import json

from . import _exleak
from ._exleak import (
    Dataset,
    ExleakError,
    bonferroni,
    incomplete_beta,
    load_dataset,
    save_dataset,
    t_cdf,
    t_sf,
)

__version__ = _exleak.__version__

__all__ = [
    "Dataset",
    "ExleakError",
    "assign_by_composition",
    "assign_one_per_category",
    "bonferroni",
    "bootstrap_mean_difference",
    "compare_protocols",
    "dataset_from_arrays",
    "error_code",
    "exemplar_disjoint_kfold",
    "generate_synthetic",
    "incomplete_beta",
    "load_dataset",
    "main",
    "one_sample_ttest",
    "preset",
    "relabel",
    "run_audit",
    "save_dataset",
    "stratified_kfold_by_exemplar",
    "t_cdf",
    "t_sf",
    "validate_dataset",
    "validate_split",
]


def error_code(exc):
    """Error code name carried by an ExleakError ("InvalidK", "IoError", ...)."""
    return str(exc).split(":", 1)[0]


def preset(name):
    return json.loads(_exleak.preset_json(name))


def generate_synthetic(config=None, **overrides):
    """config: dict of SynthConfig keys, optionally with "preset"."""
    cfg = dict(config or {})
    cfg.update(overrides)
    return _exleak.generate_synthetic_json(json.dumps(cfg))


def dataset_from_arrays(data, labels, exemplar_names, category_names):
    return _exleak.dataset_from_arrays(data, labels, list(exemplar_names), list(category_names))


def validate_dataset(dataset):
    return json.loads(_exleak.validate_dataset(dataset))


def assign_one_per_category(dataset, n_pseudocategories, seed=0):
    return json.loads(_exleak.assign_one_per_category_json(dataset, n_pseudocategories, seed))


def assign_by_composition(dataset, n_pseudocategories, composition, seed=0):
    comp = {int(k): int(v) for k, v in dict(composition).items()}
    return json.loads(_exleak.assign_by_composition_json(dataset, n_pseudocategories, comp, seed))


def relabel(dataset, assignment):
    return _exleak.relabel_json(dataset, json.dumps(assignment))


def stratified_kfold_by_exemplar(dataset, k, seed=0):
    return json.loads(_exleak.stratified_kfold_by_exemplar_json(dataset, k, seed))


def exemplar_disjoint_kfold(dataset, k, seed=0):
    return json.loads(_exleak.exemplar_disjoint_kfold_json(dataset, k, seed))


def validate_split(plan, dataset):
    return json.loads(_exleak.validate_split_json(json.dumps(plan), dataset))


def one_sample_ttest(values, mu0, alternative="greater"):
    """Returns (t, df, p)."""
    return _exleak.one_sample_ttest(list(values), mu0, alternative)


def bootstrap_mean_difference(a, b, resamples=10000, seed=0):
    """Returns (delta, low, high, excludes_zero)."""
    return _exleak.bootstrap_mean_difference(list(a), list(b), resamples, seed)


def run_audit(config, threads=1, output_dir=None, formats=("json",)):
    text = _exleak.run_audit_json(json.dumps(config), threads, str(output_dir or ""), ",".join(formats))
    return json.loads(text)


def compare_protocols(config, threads=1, output_dir=None, formats=("json",)):
    text = _exleak.compare_protocols_json(json.dumps(config), threads, str(output_dir or ""), ",".join(formats))
    return json.loads(text)


def main(args):
    """Runs the CLI in-process; returns (exit_code, stdout, stderr)."""
    return _exleak.main([str(a) for a in args])
