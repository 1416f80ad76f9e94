"""WeShap values: exact LF Shapley values in the vote + KNN proxy game.

The per-instance weight of LF ``j`` on training row ``i`` for candidate
class ``c`` is ``SV+`` of the row's (correct, wrong) vote counts if the LF
voted ``c``, ``SV-`` if it voted something else, and 0 if it abstained.
Averaging those weights over the K nearest training neighbors of each
holdout point (optionally inverse-distance weighted) and then over the
holdout set yields each LF's exact Shapley value in the proxy game, in
O(n log n + n_val d log n + K n_val m + M^2) total time.

The same accumulation decomposes the values into per-weak-label
contribution scores ``w[i, j]`` (stored sparsely), which drive fine-grained
revision and per-instance explanations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ABSTAIN, ProxyConfig, SplitBundle
from .proxy import NeighborIndex, build_index, neighbor_weights, soft_accuracy
from .tables import SVTables, build_tables

_CHUNK = 256  # validation rows per accumulation block


class VoteCounts:
    """Per-row counts of correct/wrong votes for candidate classes.

    Correct-vote counts are computed per class on demand and cached, so only
    classes that actually appear among holdout labels are materialized.
    """

    def __init__(self, weak_entries: np.ndarray, num_classes: int):
        self.entries = weak_entries
        self.num_classes = num_classes
        self.active = (weak_entries != ABSTAIN).sum(axis=1).astype(np.int64)
        self._correct: dict[int, np.ndarray] = {}

    def correct_counts(self, c: int) -> np.ndarray:
        """Votes for class ``c`` per training row."""
        cached = self._correct.get(c)
        if cached is None:
            cached = (self.entries == c).sum(axis=1).astype(np.int64)
            self._correct[c] = cached
        return cached

    def p(self, i: int, c: int) -> int:
        return int(self.correct_counts(c)[i])

    def w(self, i: int, c: int) -> int:
        return int(self.active[i] - self.correct_counts(c)[i])

    @property
    def max_coalition(self) -> int:
        return int(self.active.max()) if len(self.active) else 0


def weshap_weight(i: int, j: int, c: int, counts: VoteCounts, tables: SVTables) -> float:
    """Weight of LF ``j`` on training row ``i`` for candidate class ``c``."""
    vote = int(counts.entries[i, j])
    if vote == ABSTAIN:
        return 0.0
    p = counts.p(i, c)
    w = counts.w(i, c)
    if vote == c:
        return tables.plus(p, w)
    return tables.minus(p, w)


@dataclass(frozen=True)
class ContributionMatrix:
    """Sparse per-weak-label contribution scores in row-major COO order.

    An entry exists for every (training row, LF) pair where the LF is active
    and the row is a neighbor of at least one holdout point; entries absent
    from the store are exactly zero.
    """

    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def lf_totals(self) -> np.ndarray:
        """Column sums: the WeShap value of each LF."""
        return np.bincount(self.cols, weights=self.values, minlength=self.shape[1])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=np.float64)
        dense[self.rows, self.cols] = self.values
        return dense

    def value_at(self, i: int, j: int) -> float:
        key = i * self.shape[1] + j
        keys = self.rows * self.shape[1] + self.cols
        pos = np.searchsorted(keys, key)
        if pos < len(keys) and keys[pos] == key:
            return float(self.values[pos])
        return 0.0


@dataclass(frozen=True)
class WeShapResult:
    """Per-LF values plus their per-weak-label decomposition."""

    values: np.ndarray
    contributions: ContributionMatrix
    config: ProxyConfig
    holdout_size: int
    soft_accuracy_full: float

    def to_json_dict(self) -> dict:
        return {
            "config": {
                "k": self.config.k,
                "metric": self.config.metric,
                "weighting": self.config.weighting,
            },
            "lf_values": [float(v) for v in self.values],
            "contributions": [
                {"i": int(i), "j": int(j), "w": float(v)}
                for i, j, v in zip(
                    self.contributions.rows, self.contributions.cols, self.contributions.values
                )
            ],
            "holdout_size": self.holdout_size,
            "soft_accuracy_full": self.soft_accuracy_full,
        }


def _neighbor_shares(dists: np.ndarray, weighting: str, n_val: int) -> np.ndarray:
    """Each neighbor's share of its holdout point's averaging mass, already
    divided by the holdout size (Algorithm line: R = n_val * sum of weights)."""
    om = neighbor_weights(dists, weighting)
    return om / (om.sum(axis=1, keepdims=True) * n_val)


def weshap_dataset(
    bundle: SplitBundle,
    config: ProxyConfig,
    index: NeighborIndex | None = None,
    tables: SVTables | None = None,
) -> WeShapResult:
    """Compute WeShap values and contribution scores for a whole bundle.

    Accumulation runs in ascending holdout-row order with a fixed reduction
    order, so results are bit-identical regardless of worker count.
    """
    n, m = bundle.weak_labels.entries.shape
    n_val = len(bundle.valid)
    if n_val == 0:
        raise ValueError("holdout set is empty")
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds training size {n}")

    if index is None:
        index = build_index(bundle.train_features, config.metric)
    entries = bundle.weak_labels.entries
    counts = VoteCounts(entries, bundle.spec.num_classes)
    if tables is None:
        tables = build_tables(max(counts.max_coalition, 1), bundle.spec.num_classes)

    ids, dists = index.query(bundle.valid.features, config.k)
    shares = _neighbor_shares(dists, config.weighting, n_val)
    y_val = bundle.valid.labels

    svp = tables.sv_plus
    svm = tables.sv_minus
    row_parts: list[np.ndarray] = []
    col_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []

    for start in range(0, n_val, _CHUNK):
        stop = min(n_val, start + _CHUNK)
        rows_flat = ids[start:stop].reshape(-1)
        share_flat = shares[start:stop].reshape(-1)
        y_rep = np.repeat(y_val[start:stop], config.k)

        p_flat = np.empty(len(rows_flat), dtype=np.int64)
        for c in np.unique(y_rep):
            mask = y_rep == c
            p_flat[mask] = counts.correct_counts(int(c))[rows_flat[mask]]
        w_flat = counts.active[rows_flat] - p_flat

        sub = entries[rows_flat]
        correct = sub == y_rep[:, None]
        active = sub != ABSTAIN
        wrong = active & ~correct

        svp_vals = svp[p_flat, w_flat]
        svm_vals = svm[p_flat, w_flat]  # NaN at w=0, never selected there
        weight = np.where(correct, svp_vals[:, None], 0.0)
        weight = np.where(wrong, svm_vals[:, None], weight)
        weight *= share_flat[:, None]

        r, c = np.nonzero(active)
        row_parts.append(rows_flat[r])
        col_parts.append(c.astype(np.int64))
        val_parts.append(weight[r, c])

    if row_parts:
        all_rows = np.concatenate(row_parts)
        all_cols = np.concatenate(col_parts)
        all_vals = np.concatenate(val_parts)
    else:
        all_rows = np.empty(0, dtype=np.int64)
        all_cols = np.empty(0, dtype=np.int64)
        all_vals = np.empty(0, dtype=np.float64)

    keys = all_rows * m + all_cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    agg = np.bincount(inverse, weights=all_vals, minlength=len(uniq))
    contrib = ContributionMatrix(
        shape=(n, m),
        rows=(uniq // m).astype(np.int64),
        cols=(uniq % m).astype(np.int64),
        values=agg,
    )
    values = contrib.lf_totals()

    soft_full = soft_accuracy(None, bundle, config, bundle.valid, index)
    return WeShapResult(
        values=values,
        contributions=contrib,
        config=config,
        holdout_size=n_val,
        soft_accuracy_full=soft_full,
    )


def weshap_instance(
    j: int,
    val_point: tuple[np.ndarray, int],
    bundle: SplitBundle,
    config: ProxyConfig,
    index: NeighborIndex | None = None,
    tables: SVTables | None = None,
) -> float:
    """WeShap value of LF ``j`` for a single holdout point: the (weighted)
    mean of its per-neighbor weights."""
    return float(instance_values(val_point, bundle, config, index, tables)[j])


def instance_values(
    val_point: tuple[np.ndarray, int],
    bundle: SplitBundle,
    config: ProxyConfig,
    index: NeighborIndex | None = None,
    tables: SVTables | None = None,
) -> np.ndarray:
    """Per-LF WeShap values for one holdout point, shape (m,)."""
    features, label = val_point
    if index is None:
        index = build_index(bundle.train_features, config.metric)
    counts = VoteCounts(bundle.weak_labels.entries, bundle.spec.num_classes)
    if tables is None:
        tables = build_tables(max(counts.max_coalition, 1), bundle.spec.num_classes)

    ids, dists = index.query(np.atleast_2d(np.asarray(features, dtype=np.float64)), config.k)
    om = neighbor_weights(dists[0], config.weighting)
    share = om / om.sum()

    p = counts.correct_counts(int(label))[ids[0]]
    w = counts.active[ids[0]] - p
    sub = bundle.weak_labels.entries[ids[0]]
    correct = sub == label
    wrong = (sub != ABSTAIN) & ~correct

    weight = np.where(correct, tables.sv_plus[p, w][:, None], 0.0)
    weight = np.where(wrong, tables.sv_minus[p, w][:, None], weight)
    return (weight * share[:, None]).sum(axis=0)


@dataclass(frozen=True)
class Explanation:
    """Per-holdout-point influence breakdown (deterministic, ties by index)."""

    val_index: int
    label: int
    lf_values: np.ndarray
    top_positive: list[tuple[int, float]]
    top_negative: list[tuple[int, float]]
    neighbors: list[dict]
    lowest_entries: list[tuple[int, int, float]]

    def to_json_dict(self) -> dict:
        return {
            "val_index": self.val_index,
            "label": self.label,
            "lf_values": [float(v) for v in self.lf_values],
            "top_positive": [{"lf": j, "value": v} for j, v in self.top_positive],
            "top_negative": [{"lf": j, "value": v} for j, v in self.top_negative],
            "neighbors": self.neighbors,
            "lowest_entries": [{"i": i, "j": j, "w": v} for i, j, v in self.lowest_entries],
        }


def explain(
    val_index: int,
    result: WeShapResult,
    bundle: SplitBundle,
    config: ProxyConfig,
    top_k: int = 5,
    index: NeighborIndex | None = None,
) -> Explanation:
    """Rank LFs and neighbor training rows by their influence on one holdout
    point.  LFs inactive on the point itself still appear when they label its
    neighbors."""
    if not 0 <= val_index < len(bundle.valid):
        raise ValueError(f"val_index {val_index} outside holdout of size {len(bundle.valid)}")
    if index is None:
        index = build_index(bundle.train_features, config.metric)
    features = bundle.valid.features[val_index]
    label = int(bundle.valid.labels[val_index])

    counts = VoteCounts(bundle.weak_labels.entries, bundle.spec.num_classes)
    tables = build_tables(max(counts.max_coalition, 1), bundle.spec.num_classes)
    lf_values = instance_values((features, label), bundle, config, index, tables)

    m = bundle.num_lfs
    top_k = min(top_k, m)
    order_desc = np.lexsort((np.arange(m), -lf_values))
    order_asc = np.lexsort((np.arange(m), lf_values))
    top_positive = [(int(j), float(lf_values[j])) for j in order_desc[:top_k]]
    top_negative = [(int(j), float(lf_values[j])) for j in order_asc[:top_k]]

    ids, dists = index.query(np.atleast_2d(features), config.k)
    om = neighbor_weights(dists[0], config.weighting)
    share = om / om.sum()

    neighbors: list[dict] = []
    entry_rows: list[tuple[int, int, float]] = []
    for pos, (i, d) in enumerate(zip(ids[0], dists[0])):
        i = int(i)
        lf_weights = {}
        for j in range(m):
            vote = int(bundle.weak_labels.entries[i, j])
            if vote == ABSTAIN:
                continue
            wij = weshap_weight(i, j, label, counts, tables) * float(share[pos])
            lf_weights[j] = wij
            entry_rows.append((i, j, wij))
        neighbors.append(
            {
                "row": i,
                "distance": float(d),
                "weight_share": float(share[pos]),
                "lf_weights": {str(j): float(v) for j, v in sorted(lf_weights.items())},
            }
        )

    entry_rows.sort(key=lambda t: (t[2], t[0], t[1]))
    return Explanation(
        val_index=val_index,
        label=label,
        lf_values=lf_values,
        top_positive=top_positive,
        top_negative=top_negative,
        neighbors=neighbors,
        lowest_entries=entry_rows[:top_k],
    )
