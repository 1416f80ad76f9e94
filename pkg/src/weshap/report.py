"""Valuation report assembly and serialization.

A report bundles everything the CLI emits and the dashboard consumes:
per-LF statistics and scores, the engine result with its contribution
decomposition, optional ranking curves and revision outcomes, plus a
content fingerprint of the inputs so stale dashboard sessions can be
detected.  Serialization is canonical (sorted keys, repr floats, no
timestamps): identical inputs and flags produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .data import ProxyConfig, SplitBundle, lf_summary
from .engine import WeShapResult
from .evaluate import RankCurve, RevisionOutcome, baseline_scores, downstream_accuracy


def fingerprint_inputs(manifest_path: str | Path, config: ProxyConfig, seed: int) -> str:
    """Content hash of the manifest, every file it references, and the run
    configuration."""
    manifest_path = Path(manifest_path)
    digest = hashlib.sha256()
    digest.update(manifest_path.read_bytes())
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key in sorted(manifest):
        value = manifest[key]
        if isinstance(value, str):
            ref = manifest_path.parent / value
            if ref.is_file():
                digest.update(key.encode())
                digest.update(ref.read_bytes())
    digest.update(f"k={config.k};metric={config.metric};weighting={config.weighting};seed={seed}".encode())
    return digest.hexdigest()


def _clean(value) -> float | None:
    value = float(value)
    return None if math.isnan(value) else value


def build_report(
    bundle: SplitBundle,
    config: ProxyConfig,
    result: WeShapResult,
    fingerprint: str,
    seed: int = 0,
    curves: dict[str, RankCurve] | None = None,
    revisions: dict[str, RevisionOutcome] | None = None,
) -> dict:
    """Assemble the full report dict; every LF row carries each score or an
    explicit null."""
    summary = lf_summary(bundle.weak_labels, bundle.valid_weak_labels, bundle.valid.labels)
    have_valid_weak = bundle.valid_weak_labels is not None
    scores: dict[str, np.ndarray] = {
        "RND": baseline_scores("RND", bundle, seed=seed).scores,
        "COV": baseline_scores("COV", bundle).scores,
    }
    if have_valid_weak:
        scores["ACC"] = baseline_scores("ACC", bundle).scores
        scores["IWS"] = baseline_scores("IWS", bundle).scores

    lf_table = []
    for j, name in enumerate(bundle.weak_labels.lf_names):
        row = {
            "index": j,
            "name": name,
            "accuracy": _clean(summary.accuracy[j]),
            "coverage": float(summary.coverage[j]),
            "overlap": float(summary.overlap[j]),
            "conflict": float(summary.conflict[j]),
            "activation_count": int(summary.activation_count[j]),
            "weshap": float(result.values[j]),
            "scores": {method: _clean(vals[j]) for method, vals in scores.items()},
        }
        for method in ("ACC", "IWS"):
            row["scores"].setdefault(method, None)
        lf_table.append(row)

    base_valid = downstream_accuracy(bundle.weak_labels.entries, bundle, config, bundle.valid)
    base_test = None
    if bundle.test is not None:
        base_test = downstream_accuracy(bundle.weak_labels.entries, bundle, config, bundle.test)

    report = {
        "version": __version__,
        "fingerprint": fingerprint,
        "num_classes": bundle.spec.num_classes,
        "num_train": bundle.num_train,
        "num_lfs": bundle.num_lfs,
        "holdout_size": len(bundle.valid),
        "seed": seed,
        "config": {"k": config.k, "metric": config.metric, "weighting": config.weighting},
        "soft_accuracy_full": result.soft_accuracy_full,
        "base_valid_accuracy": base_valid,
        "base_test_accuracy": base_test,
        "lf_table": lf_table,
        "weshap": result.to_json_dict(),
    }
    if curves:
        report["rank_curves"] = {
            method: {
                "prefix_sizes": curve.prefix_sizes,
                "accuracies": curve.accuracies,
                "area": curve.area,
            }
            for method, curve in curves.items()
        }
    if revisions:
        report["revisions"] = {mode: outcome.to_json_dict() for mode, outcome in revisions.items()}
    return report


def dump_json(obj: dict, path: str | Path | None) -> str:
    """Canonical JSON text; written to ``path`` when given."""
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
