"""Command-line entry point: compute, rank, prune, revise, explain,
oracle-check, synth, bench, serve.

Configuration precedence is flags > manifest fields > defaults
(k=10, euclidean, uniform).  The WESHAP_THREADS environment variable caps
parallel neighbor-query workers without affecting results.  Exit codes: 2
for usage errors, 3 for data validation errors, 4 for an oracle-check
deviation above tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .data import (
    BundleValidationError,
    ProxyConfig,
    SplitBundle,
    bundle_config,
    load_bundle,
    save_bundle,
    save_weak_labels,
)
from .engine import explain, weshap_dataset
from .evaluate import (
    METHODS,
    baseline_scores,
    fine_revision,
    prune_search,
    rank_curve,
    runtime_bench,
    synth_generate,
)
from .oracle import ProxyGame, exact_shapley_subsets
from .report import build_report, dump_json, fingerprint_inputs
from .tables import build_tables

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ORACLE = 4

ORACLE_TOLERANCE = 1e-6


def _add_manifest_and_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="bundle manifest JSON")
    parser.add_argument("--k", type=int, default=None, help="neighbor count (default 10)")
    parser.add_argument(
        "--metric", choices=("euclidean", "manhattan", "cosine"), default=None, help="distance metric"
    )
    parser.add_argument(
        "--weights", choices=("uniform", "inverse-distance"), default=None, help="neighbor weighting"
    )


def _resolve_config(args: argparse.Namespace) -> ProxyConfig:
    fields = bundle_config(args.manifest)
    k = args.k if args.k is not None else fields.get("k", 10)
    metric = args.metric if args.metric is not None else fields.get("metric", "euclidean")
    weighting = args.weights if args.weights is not None else fields.get("weighting", "uniform")
    return ProxyConfig(k=int(k), metric=metric, weighting=weighting)


def _load(args: argparse.Namespace) -> tuple[SplitBundle, ProxyConfig]:
    bundle = load_bundle(args.manifest)
    return bundle, _resolve_config(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weshap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="compute LF values and write a valuation report")
    _add_manifest_and_config(p)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--seed", type=int, default=0, help="seed for the RND baseline column")
    p.add_argument("--curves", action="store_true", help="include ranking curves (needs a test set)")
    p.add_argument("--dump-tables", default=None, help="also write the SV tables as CSV")

    p = sub.add_parser("rank", help="ranking curves for one or more scoring methods")
    _add_manifest_and_config(p)
    p.add_argument("--methods", default="WESHAP", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("prune", help="search the best top-p LF prefix on validation accuracy")
    _add_manifest_and_config(p)
    p.add_argument("--method", default="WESHAP", help="scoring method for the ranking")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="outcome JSON path")
    p.add_argument("--revised-out", default=None, help="write the revised weak-label CSV here")

    p = sub.add_parser("revise", help="fine-grained revision: mute low-contribution weak labels")
    _add_manifest_and_config(p)
    p.add_argument("--theta", type=float, default=None, help="fixed threshold (default: searched)")
    p.add_argument("--out", required=True, help="outcome JSON path")
    p.add_argument("--revised-out", default=None, help="write the revised weak-label CSV here")

    p = sub.add_parser("explain", help="per-holdout-point influence breakdown")
    _add_manifest_and_config(p)
    p.add_argument("--val-idx", type=int, required=True)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")

    p = sub.add_parser("oracle-check", help="compare the engine against brute-force Shapley values")
    _add_manifest_and_config(p)

    p = sub.add_parser("synth", help="write a synthetic bundle to disk")
    p.add_argument("--kind", required=True, choices=("running-example", "motivating", "blobs"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None, help="JSON dict of generator parameters")

    p = sub.add_parser("bench", help="runtime benchmark over a size grid")
    p.add_argument("--sizes", required=True, help='JSON list like [{"n":1000,"d":8,"m":20,"n_val":100}]')
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--metric", default="euclidean")
    p.add_argument("--weights", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="timing CSV path")

    p = sub.add_parser("serve", help="serve the report API and dashboard assets")
    _add_manifest_and_config(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--static-dir", default=None, help="directory of dashboard assets to serve at /")
    return parser


def _cmd_compute(args: argparse.Namespace) -> int:
    bundle, config = _load(args)
    result = weshap_dataset(bundle, config)
    fp = fingerprint_inputs(args.manifest, config, args.seed)

    curves = None
    if args.curves:
        if bundle.test is None:
            raise BundleValidationError("--curves needs a test set in the bundle")
        curves = {}
        for method in METHODS:
            try:
                scores = baseline_scores(method, bundle, seed=args.seed, config=config)
            except ValueError:
                continue
            curves[method] = rank_curve(scores, bundle, config)

    report = build_report(bundle, config, result, fp, seed=args.seed, curves=curves)
    dump_json(report, args.out)
    if args.dump_tables:
        counts = (bundle.weak_labels.entries != -1).sum(axis=1)
        tables = build_tables(max(int(counts.max()), 1), bundle.spec.num_classes)
        with open(args.dump_tables, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["p", "w", "sv_plus", "sv_minus"])
            for p in range(tables.max_size + 1):
                for w in range(tables.max_size + 1 - p):
                    plus = tables.sv_plus[p, w]
                    minus = tables.sv_minus[p, w]
                    writer.writerow(
                        [p, w, repr(float(plus)), "" if np.isnan(minus) else repr(float(minus))]
                    )
    print(f"report written to {args.out} (fingerprint {fp[:12]})")
    return 0


def _cmd_rank(args: argparse.Namespace) -> int:
    bundle, config = _load(args)
    methods = [m.strip().upper() for m in args.methods.split(",") if m.strip()]
    rows = []
    for method in methods:
        scores = baseline_scores(method, bundle, seed=args.seed, config=config)
        curve = rank_curve(scores, bundle, config)
        for size, acc in zip(curve.prefix_sizes, curve.accuracies):
            rows.append({"method": method, "prefix": size, "test_accuracy": acc, "area": curve.area})
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "prefix", "test_accuracy", "area"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"curves written to {args.out}")
    return 0


def _cmd_prune(args: argparse.Namespace) -> int:
    bundle, config = _load(args)
    scores = baseline_scores(args.method, bundle, seed=args.seed, config=config)
    outcome = prune_search(scores, bundle, config)
    dump_json(outcome.to_json_dict(), args.out)
    if args.revised_out:
        save_weak_labels(outcome.revised_weak_labels, args.revised_out)
    print(
        f"prune: kept top-{int(outcome.chosen_parameter)} LFs, "
        f"valid accuracy {outcome.valid_accuracy_before:.4f} -> {outcome.valid_accuracy_after:.4f}"
    )
    return 0


def _cmd_revise(args: argparse.Namespace) -> int:
    bundle, config = _load(args)
    result = weshap_dataset(bundle, config)
    outcome = fine_revision(result, bundle, config, theta=args.theta)
    dump_json(outcome.to_json_dict(), args.out)
    if args.revised_out:
        save_weak_labels(outcome.revised_weak_labels, args.revised_out)
    print(
        f"revise: theta={outcome.chosen_parameter}, "
        f"valid accuracy {outcome.valid_accuracy_before:.4f} -> {outcome.valid_accuracy_after:.4f}"
    )
    return 0


def _cmd_explain(args: argparse.Namespace) -> int:
    bundle, config = _load(args)
    result = weshap_dataset(bundle, config)
    breakdown = explain(args.val_idx, result, bundle, config, top_k=args.top_k)
    text = dump_json(breakdown.to_json_dict(), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    bundle, config = _load(args)
    if bundle.num_lfs > 12:
        raise BundleValidationError(f"oracle-check is limited to 12 LFs, bundle has {bundle.num_lfs}")
    result = weshap_dataset(bundle, config)
    game = ProxyGame.from_bundle(bundle, config)
    oracle_values = exact_shapley_subsets(game)
    deviation = float(np.max(np.abs(result.values - oracle_values)))
    print(f"max deviation between engine and subset oracle: {deviation:.3e}")
    if deviation > ORACLE_TOLERANCE:
        print(f"FAIL: deviation exceeds {ORACLE_TOLERANCE}")
        return EXIT_ORACLE
    print("OK")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    params = json.loads(args.params) if args.params else None
    bundle = synth_generate(args.kind, params=params, seed=args.seed)
    # the running example is built around a 3-neighbor proxy
    config = ProxyConfig(k=3) if args.kind == "running-example" else None
    manifest = save_bundle(bundle, args.out, name=args.kind, config=config)
    print(f"bundle written to {manifest}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    sizes = json.loads(args.sizes)
    config = ProxyConfig(k=args.k, metric=args.metric, weighting=args.weights)
    rows = runtime_bench(sizes, config, seed=args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["n", "d", "m", "n_val", "k", "t_index", "t_tables", "t_score", "t_total"]
        )
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(
            f"n={row['n']} m={row['m']} n_val={row['n_val']}: "
            f"index {row['t_index']:.3f}s tables {row['t_tables'] * 1e3:.2f}ms "
            f"score {row['t_score']:.3f}s total {row['t_total']:.3f}s"
        )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve_report

    bundle, config = _load(args)
    fp = fingerprint_inputs(args.manifest, config, args.seed)
    serve_report(
        bundle,
        config,
        fingerprint=fp,
        host=args.host,
        port=args.port,
        seed=args.seed,
        static_dir=args.static_dir,
    )
    return 0


_COMMANDS = {
    "compute": _cmd_compute,
    "rank": _cmd_rank,
    "prune": _cmd_prune,
    "revise": _cmd_revise,
    "explain": _cmd_explain,
    "oracle-check": _cmd_oracle_check,
    "synth": _cmd_synth,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BundleValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
