"""Experiment protocols: baselines, ranking curves, pruning, fine revision,
synthetic bundles, silhouette analysis, and runtime benchmarking.

Downstream accuracy here follows the training-harness convention: training
rows left without any active LF are dropped from the neighbor pool before
the KNN model is evaluated.  The valuation engine itself never drops rows
(their vote distribution is well-defined as uniform); the two pipelines are
deliberately distinct.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import (
    ABSTAIN,
    LabeledSet,
    ProxyConfig,
    SplitBundle,
    TaskSpec,
    WeakLabelMatrix,
    lf_summary,
)
from .engine import WeShapResult, weshap_dataset
from .proxy import build_index, neighbor_weights
from .tables import build_tables

METHODS = ("RND", "ACC", "COV", "IWS", "WESHAP")

PRUNE_GRID_CAP = 200
REVISION_QUANTILES = 64


@dataclass(frozen=True)
class MetricScores:
    """Per-LF scores for one evaluation method; NaN marks undefined scores."""

    method: str
    scores: np.ndarray
    seed: int = 0


@dataclass(frozen=True)
class RankCurve:
    """Hard test accuracy when training on growing score-ranked LF prefixes."""

    prefix_sizes: list[int]
    accuracies: list[float]
    area: float


@dataclass(frozen=True)
class RevisionOutcome:
    mode: str
    chosen_parameter: float
    valid_accuracy_before: float
    valid_accuracy_after: float
    test_accuracy_before: float | None
    test_accuracy_after: float | None
    revised_weak_labels: WeakLabelMatrix

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "chosen_parameter": None if self.chosen_parameter == -np.inf else float(self.chosen_parameter),
            "valid_accuracy_before": self.valid_accuracy_before,
            "valid_accuracy_after": self.valid_accuracy_after,
            "test_accuracy_before": self.test_accuracy_before,
            "test_accuracy_after": self.test_accuracy_after,
        }


# ---------------------------------------------------------------------------
# Downstream training harness
# ---------------------------------------------------------------------------


def downstream_accuracy(
    weak_entries: np.ndarray,
    bundle: SplitBundle,
    config: ProxyConfig,
    eval_set: LabeledSet,
    hard: bool = True,
) -> float:
    """Accuracy of the KNN model trained on the given weak-label matrix.

    Rows with no active LF are excluded from the neighbor pool; if nothing
    is active at all, predictions fall back to uniform (hard predictions
    then tie-break to class 0).
    """
    C = bundle.spec.num_classes
    active = weak_entries != ABSTAIN
    pool = np.flatnonzero(active.any(axis=1))
    if len(pool) == 0:
        if hard:
            return float(np.mean(eval_set.labels == 0))
        return 1.0 / C

    k_eff = min(config.k, len(pool))
    index = build_index(bundle.train_features[pool], config.metric)
    ids, dists = index.query(eval_set.features, k_eff)
    om = neighbor_weights(dists, config.weighting)

    sub = weak_entries[pool][ids.reshape(-1)]
    rows_active = sub != ABSTAIN
    counts = np.zeros((sub.shape[0], C), dtype=np.float64)
    r, c = np.nonzero(rows_active)
    np.add.at(counts, (r, sub[r, c]), 1.0)
    totals = rows_active.sum(axis=1).astype(np.float64)
    theta = np.full((sub.shape[0], C), 1.0 / C, dtype=np.float64)
    voted = totals > 0
    theta[voted] = counts[voted] / totals[voted, None]
    theta = theta.reshape(len(eval_set), k_eff, C)

    probs = np.einsum("qk,qkc->qc", om, theta) / om.sum(axis=1)[:, None]
    if hard:
        preds = np.argmax(probs, axis=1)
        return float(np.mean(preds == eval_set.labels))
    return float(np.mean(probs[np.arange(len(eval_set)), eval_set.labels]))


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def baseline_scores(
    method: str,
    bundle: SplitBundle,
    seed: int = 0,
    config: ProxyConfig | None = None,
) -> MetricScores:
    """Score all LFs by one method.

    RND draws Uniform[0, 1) per LF from the seed; ACC is accuracy on the
    validation weak labels (NaN for LFs never active there, ranking last);
    COV is coverage on the training matrix; IWS is (2*ACC - 1) * COV;
    WESHAP runs the valuation engine with the given config.
    """
    m = bundle.num_lfs
    method = method.upper()
    if method == "RND":
        rng = np.random.default_rng(seed)
        return MetricScores("RND", rng.random(m), seed)

    if method == "WESHAP":
        result = weshap_dataset(bundle, config or ProxyConfig())
        return MetricScores("WESHAP", result.values.copy(), seed)

    summary = _summary_for(bundle, need_accuracy=method in ("ACC", "IWS"))
    if method == "ACC":
        return MetricScores("ACC", summary.accuracy.copy(), seed)
    if method == "COV":
        return MetricScores("COV", summary.coverage.copy(), seed)
    if method == "IWS":
        return MetricScores("IWS", (2.0 * summary.accuracy - 1.0) * summary.coverage, seed)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _summary_for(bundle: SplitBundle, need_accuracy: bool):
    if need_accuracy and bundle.valid_weak_labels is None:
        raise ValueError("this method needs validation weak labels, but the bundle has none")
    return lf_summary(bundle.weak_labels, bundle.valid_weak_labels, bundle.valid.labels)


def rank_order(scores: np.ndarray) -> np.ndarray:
    """LF indices sorted by descending score; NaN last; ties by ascending index."""
    clean = np.where(np.isnan(scores), -np.inf, scores)
    return np.lexsort((np.arange(len(scores)), -clean))


# ---------------------------------------------------------------------------
# Ranking curve
# ---------------------------------------------------------------------------


def prefix_sizes(m: int) -> list[int]:
    sizes = list(range(10, m + 1, 10))
    if not sizes or sizes[-1] != m:
        sizes.append(m)
    return sizes


def rank_curve(scores: MetricScores, bundle: SplitBundle, config: ProxyConfig) -> RankCurve:
    """Train on the top-p LFs for growing p and record hard test accuracy."""
    if bundle.test is None:
        raise ValueError("rank_curve needs a test set")
    order = rank_order(scores.scores)
    sizes = prefix_sizes(bundle.num_lfs)
    accs: list[float] = []
    for p in sizes:
        keep = order[:p]
        revised = _mute_columns(bundle.weak_labels.entries, keep)
        accs.append(downstream_accuracy(revised, bundle, config, bundle.test, hard=True))
    return RankCurve(prefix_sizes=sizes, accuracies=accs, area=float(np.mean(accs)))


def _mute_columns(entries: np.ndarray, keep: np.ndarray) -> np.ndarray:
    out = np.full_like(entries, ABSTAIN)
    out[:, keep] = entries[:, keep]
    return out


# ---------------------------------------------------------------------------
# Revision
# ---------------------------------------------------------------------------


def prune_search(scores: MetricScores, bundle: SplitBundle, config: ProxyConfig) -> RevisionOutcome:
    """Keep the top-p LFs by score, choosing p to maximize validation hard
    accuracy (ties prefer larger p, so the all-LF no-op is always in play)."""
    m = bundle.num_lfs
    order = rank_order(scores.scores)
    if m <= PRUNE_GRID_CAP:
        grid = list(range(1, m + 1))
    else:
        grid = sorted(set(np.linspace(1, m, PRUNE_GRID_CAP).round().astype(int).tolist()))

    before_valid = downstream_accuracy(bundle.weak_labels.entries, bundle, config, bundle.valid)
    best_p, best_acc, best_entries = None, -np.inf, None
    for p in grid:
        revised = _mute_columns(bundle.weak_labels.entries, order[:p])
        acc = downstream_accuracy(revised, bundle, config, bundle.valid)
        if acc >= best_acc:  # ties resolve toward larger p
            best_p, best_acc, best_entries = p, acc, revised

    test_before = test_after = None
    if bundle.test is not None:
        test_before = downstream_accuracy(bundle.weak_labels.entries, bundle, config, bundle.test)
        test_after = downstream_accuracy(best_entries, bundle, config, bundle.test)
    return RevisionOutcome(
        mode="prune",
        chosen_parameter=float(best_p),
        valid_accuracy_before=before_valid,
        valid_accuracy_after=best_acc,
        test_accuracy_before=test_before,
        test_accuracy_after=test_after,
        revised_weak_labels=WeakLabelMatrix(best_entries, bundle.weak_labels.lf_names),
    )


def apply_revision(entries: np.ndarray, contributions_dense: np.ndarray, theta: float) -> np.ndarray:
    """Mute active weak labels whose contribution score falls below theta."""
    revised = entries.copy()
    mute = (entries != ABSTAIN) & (contributions_dense < theta)
    revised[mute] = ABSTAIN
    return revised


def revision_candidates(result: WeShapResult, entries: np.ndarray) -> np.ndarray:
    """Deterministic threshold grid: -inf, 0, and 64 evenly spaced quantiles
    of the distinct contribution values over active entries."""
    dense = result.contributions.to_dense()
    vals = dense[entries != ABSTAIN]
    distinct = np.unique(vals)
    cands = [-np.inf, 0.0]
    if len(distinct):
        levels = np.linspace(0.0, 1.0, REVISION_QUANTILES)
        cands.extend(np.quantile(distinct, levels).tolist())
    return np.unique(np.asarray(cands, dtype=np.float64))


def fine_revision(
    result: WeShapResult,
    bundle: SplitBundle,
    config: ProxyConfig,
    theta: float | None = None,
) -> RevisionOutcome:
    """Mute weak labels below a contribution threshold.

    With ``theta=None`` the threshold is searched over the deterministic
    candidate grid, maximizing validation hard accuracy with ties toward the
    smaller threshold (fewer mutations); the -inf candidate makes the search
    regression-free.  An explicit ``theta`` is applied as-is.
    """
    entries = bundle.weak_labels.entries
    dense = result.contributions.to_dense()
    before_valid = downstream_accuracy(entries, bundle, config, bundle.valid)

    if theta is not None:
        candidates = np.asarray([theta], dtype=np.float64)
    else:
        candidates = revision_candidates(result, entries)

    best_theta, best_acc, best_entries = None, -np.inf, None
    for th in candidates:
        revised = apply_revision(entries, dense, th)
        acc = downstream_accuracy(revised, bundle, config, bundle.valid)
        if acc > best_acc:  # ties resolve toward the smaller (earlier) theta
            best_theta, best_acc, best_entries = th, acc, revised

    test_before = test_after = None
    if bundle.test is not None:
        test_before = downstream_accuracy(entries, bundle, config, bundle.test)
        test_after = downstream_accuracy(best_entries, bundle, config, bundle.test)
    return RevisionOutcome(
        mode="fine",
        chosen_parameter=float(best_theta),
        valid_accuracy_before=before_valid,
        valid_accuracy_after=best_acc,
        test_accuracy_before=test_before,
        test_accuracy_after=test_after,
        revised_weak_labels=WeakLabelMatrix(best_entries, bundle.weak_labels.lf_names),
    )


# ---------------------------------------------------------------------------
# Synthetic bundles
# ---------------------------------------------------------------------------


def synth_generate(kind: str, params: dict | None = None, seed: int = 0) -> SplitBundle:
    """Deterministic synthetic bundles: the 8-point running example, the
    boundary-straddling motivating setup, or parameterized Gaussian blobs."""
    params = dict(params or {})
    try:
        if kind == "running-example":
            return running_example()
        if kind == "motivating":
            return motivating_bundle(seed=seed, **params)
        if kind == "blobs":
            return blob_bundle(seed=seed, **params)
    except TypeError as exc:
        raise ValueError(f"invalid params for kind {kind!r}: {exc}") from exc
    raise ValueError(f"unknown synthetic kind {kind!r}")


def running_example() -> SplitBundle:
    """Six training points in two clusters, three LFs, two labeled holdout
    points; one wrong weak label on each side.  Intended K = 3."""
    train = np.array(
        [
            [-3.0, 0.5],
            [-3.5, -0.5],
            [-2.4, 0.0],
            [2.4, 0.0],
            [3.0, 0.5],
            [3.5, -0.5],
        ]
    )
    weak = WeakLabelMatrix(
        np.array(
            [
                [0, -1, -1],
                [0, -1, -1],
                [0, 1, -1],
                [0, -1, 1],
                [-1, -1, 1],
                [-1, -1, 1],
            ]
        ),
        ("lf1", "lf2", "lf3"),
    )
    valid = LabeledSet(np.array([[-3.0, 0.0], [3.0, 0.0]]), np.array([0, 1]))
    valid_weak = WeakLabelMatrix(np.array([[0, -1, -1], [-1, -1, 1]]), weak.lf_names)
    return SplitBundle(
        train_features=train,
        weak_labels=weak,
        valid=valid,
        spec=TaskSpec(num_classes=2),
        valid_weak_labels=valid_weak,
    )


def _stratified_uniform(n: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """One point per equal-width stratum with sub-stratum jitter; interval
    counts are deterministic to +/- 1 regardless of seed."""
    width = (hi - lo) / n
    centers = lo + (np.arange(n) + 0.5) * width
    return centers + rng.uniform(-0.4, 0.4, size=n) * width


def _motivating_split(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    x0 = _stratified_uniform(n, -4.0, 4.0, rng)
    x0 = rng.permutation(x0)
    x1 = rng.normal(0.0, 0.05, size=n)
    features = np.column_stack([x0, x1])
    labels = (x0 > 0).astype(np.int64)
    return features, labels


_MOT_LF1_EDGE = -1.0
_MOT_POCKET = (2.0, 2.25)
_MOT_WINDOW = 0.125
_MOT_LF3_EDGE = 3.0


def _motivating_weak(x0: np.ndarray) -> np.ndarray:
    """Three interval rules: a broad class-0 rule with a small wrong pocket,
    a boundary-straddling stump sharing that pocket (~50% accurate), and a
    clean class-1 rule, asymmetric so that dropping the stump shifts the
    learned boundary away from zero."""
    n = len(x0)
    weak = np.full((n, 3), ABSTAIN, dtype=np.int64)
    pocket = (x0 > _MOT_POCKET[0]) & (x0 <= _MOT_POCKET[1])
    weak[(x0 < _MOT_LF1_EDGE) | pocket, 0] = 0
    window = np.abs(x0) < _MOT_WINDOW
    weak[window, 1] = (x0[window] > 0).astype(np.int64)
    weak[pocket, 1] = 0
    weak[x0 > _MOT_LF3_EDGE, 2] = 1
    return weak


def motivating_bundle(
    seed: int = 0,
    n_train: int = 4000,
    n_val: int = 2000,
    n_test: int = 2000,
) -> SplitBundle:
    """Two-class 1-D-plus-noise data where the boundary-straddling LF has
    ~50% accuracy but positive marginal value: without it the labeled
    regions are asymmetric and the induced boundary drifts off the truth."""
    rng = np.random.default_rng(seed)
    train_x, _ = _motivating_split(n_train, rng)
    val_x, val_y = _motivating_split(n_val, rng)
    test_x, test_y = _motivating_split(n_test, rng)

    weak = WeakLabelMatrix(_motivating_weak(train_x[:, 0]), ("lf1", "lf2", "lf3"))
    valid_weak = WeakLabelMatrix(_motivating_weak(val_x[:, 0]), weak.lf_names)
    return SplitBundle(
        train_features=train_x,
        weak_labels=weak,
        valid=LabeledSet(val_x, val_y),
        spec=TaskSpec(num_classes=2),
        valid_weak_labels=valid_weak,
        test=LabeledSet(test_x, test_y),
    )


@dataclass(frozen=True)
class _BlobLF:
    anchor: np.ndarray
    radius: float
    label: int

    def apply(self, features: np.ndarray) -> np.ndarray:
        out = np.full(len(features), ABSTAIN, dtype=np.int64)
        dist = np.linalg.norm(features - self.anchor, axis=1)
        out[dist <= self.radius] = self.label
        return out


def blob_bundle(
    seed: int = 0,
    n_train: int = 300,
    n_val: int = 60,
    n_test: int = 0,
    d: int = 2,
    num_classes: int = 2,
    separation: float = 8.0,
    std: float = 1.0,
    m_clean: int = 4,
    m_flipped: int = 0,
    coverage: float = 0.35,
) -> SplitBundle:
    """Gaussian blobs (one per class) labeled by ball-shaped LFs anchored at
    random training points; flipped LFs vote for a wrong class."""
    rng = np.random.default_rng(seed)
    C = num_classes
    centers = np.zeros((C, d))
    angles = 2.0 * np.pi * np.arange(C) / C
    centers[:, 0] = np.cos(angles) * separation / 2.0
    if d > 1:
        centers[:, 1] = np.sin(angles) * separation / 2.0

    def draw(n: int) -> tuple[np.ndarray, np.ndarray]:
        y = np.repeat(np.arange(C), -(-n // C))[:n]
        X = centers[y] + rng.normal(0.0, std, size=(n, d))
        perm = rng.permutation(n)
        return X[perm], y[perm]

    train_x, train_y = draw(n_train)
    val_x, val_y = draw(n_val)
    test = None
    test_x = test_y = None
    if n_test:
        test_x, test_y = draw(n_test)
        test = LabeledSet(test_x, test_y)

    lfs: list[_BlobLF] = []
    names: list[str] = []
    total = m_clean + m_flipped
    for t in range(total):
        cls = t % C
        pool = np.flatnonzero(train_y == cls)
        anchor = train_x[rng.choice(pool)]
        radius = float(np.quantile(np.linalg.norm(train_x - anchor, axis=1), coverage))
        flipped = t >= m_clean
        label = cls if not flipped else int((cls + 1 + rng.integers(C - 1)) % C)
        lfs.append(_BlobLF(anchor=anchor, radius=radius, label=label))
        names.append(f"{'flip' if flipped else 'lf'}_{t}")

    weak = WeakLabelMatrix(np.column_stack([lf.apply(train_x) for lf in lfs]), tuple(names))
    valid_weak = WeakLabelMatrix(np.column_stack([lf.apply(val_x) for lf in lfs]), tuple(names))
    return SplitBundle(
        train_features=train_x,
        weak_labels=weak,
        valid=LabeledSet(val_x, val_y),
        spec=TaskSpec(num_classes=C),
        valid_weak_labels=valid_weak,
        test=test,
    )


# ---------------------------------------------------------------------------
# Silhouette
# ---------------------------------------------------------------------------


def silhouette(features: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient (b - a) / max(a, b) with euclidean
    distances; singleton-class points contribute 0."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("silhouette needs at least two classes present")
    n = len(features)
    diff = features[:, None, :] - features[None, :, :]
    dist = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))

    scores = np.zeros(n, dtype=np.float64)
    for i in range(n):
        same = labels == labels[i]
        n_same = int(same.sum())
        if n_same <= 1:
            continue
        a = dist[i, same].sum() / (n_same - 1)
        b = min(dist[i, labels == c].mean() for c in classes if c != labels[i])
        denom = max(a, b)
        if denom > 0:
            scores[i] = (b - a) / denom
    return float(scores.mean())


# ---------------------------------------------------------------------------
# Runtime benchmark
# ---------------------------------------------------------------------------


def bench_bundle(n: int, d: int, m: int, n_val: int, num_classes: int = 2, seed: int = 0) -> SplitBundle:
    """Random bundle for timing runs; row 0 fires every LF so the table side
    equals m."""
    rng = np.random.default_rng(seed)
    train = rng.standard_normal((n, d))
    entries = np.full((n, m), ABSTAIN, dtype=np.int64)
    active = rng.random((n, m)) < 0.3
    entries[active] = rng.integers(num_classes, size=int(active.sum()))
    entries[0, :] = rng.integers(num_classes, size=m)
    valid = LabeledSet(rng.standard_normal((n_val, d)), rng.integers(num_classes, size=n_val))
    return SplitBundle(
        train_features=train,
        weak_labels=WeakLabelMatrix(entries),
        valid=valid,
        spec=TaskSpec(num_classes=num_classes),
    )


def runtime_bench(
    sizes: Sequence[dict],
    config: ProxyConfig | None = None,
    seed: int = 0,
    table_repeats: int = 5,
) -> list[dict]:
    """Wall-times for the valuation pipeline over a size grid.

    Each row reports the index build, the SV-table build (median over
    repeats; it is microseconds-fast and needs the medianing), and the
    query-plus-scoring time of the engine with both prebuilt.
    """
    config = config or ProxyConfig()
    rows: list[dict] = []
    for spec_row in sizes:
        n = int(spec_row["n"])
        d = int(spec_row["d"])
        m = int(spec_row["m"])
        n_val = int(spec_row["n_val"])
        k = int(spec_row.get("k", config.k))
        cfg = ProxyConfig(k=k, metric=config.metric, weighting=config.weighting)
        bundle = bench_bundle(n, d, m, n_val, seed=seed)

        t0 = time.perf_counter()
        index = build_index(bundle.train_features, cfg.metric)
        t_index = time.perf_counter() - t0

        table_times = []
        for _ in range(table_repeats):
            t0 = time.perf_counter()
            tables = build_tables(m, bundle.spec.num_classes)
            table_times.append(time.perf_counter() - t0)
        t_tables = float(np.median(table_times))

        t0 = time.perf_counter()
        weshap_dataset(bundle, cfg, index=index, tables=tables)
        t_score = time.perf_counter() - t0

        rows.append(
            {
                "n": n,
                "d": d,
                "m": m,
                "n_val": n_val,
                "k": k,
                "t_index": t_index,
                "t_tables": t_tables,
                "t_score": t_score,
                "t_total": t_index + t_tables + t_score,
            }
        )
    return rows
