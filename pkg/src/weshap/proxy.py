"""Majority-vote label model, exact KNN downstream model, and coalition utility.

The label model turns each training row's weak labels into class
probabilities (uniform when no LF fires).  The downstream model averages
those probabilities over the exact K nearest training neighbors of each
holdout point, optionally weighted by inverse distance.  Soft accuracy is
the mean predicted probability of the true class; the coalition utility is
its gain over random guessing, which defines the cooperative game the
valuation engine solves.

Nearest-neighbor queries are exact: euclidean and manhattan metrics are
served by a KD-tree whose candidate sets are re-ranked with canonical
distances, cosine by a dense scan over normalized vectors.  Distance ties
always break toward the smaller training-row index, so neighbor sets are
bit-reproducible and independent of worker count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from .data import ABSTAIN, ProxyConfig, SplitBundle, LabeledSet

INVERSE_DISTANCE_EPS = 1e-12
_TIE_SLACK = 1e-9  # relative slack covering KD-tree vs canonical rounding


def worker_count() -> int:
    """Worker cap for parallel KNN queries; WESHAP_THREADS overrides cpu count."""
    env = os.environ.get("WESHAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def mv_predict(weak_label_row: np.ndarray, num_classes: int) -> np.ndarray:
    """Majority-vote class probabilities for one training row.

    Votes for each class are normalized by the number of active LFs; a row
    with no active LF predicts every class with probability 1/C exactly.
    """
    row = np.asarray(weak_label_row)
    active = row != ABSTAIN
    probs = np.zeros(num_classes, dtype=np.float64)
    total = int(active.sum())
    if total == 0:
        probs[:] = 1.0 / num_classes
        return probs
    votes = np.bincount(row[active], minlength=num_classes).astype(np.float64)
    return votes / total


def mv_probs(weak_entries: np.ndarray, num_classes: int, rows: np.ndarray | None = None) -> np.ndarray:
    """Vectorized majority-vote probabilities for selected training rows."""
    sub = weak_entries if rows is None else weak_entries[rows]
    n = sub.shape[0]
    active = sub != ABSTAIN
    counts = np.zeros((n, num_classes), dtype=np.float64)
    r, c = np.nonzero(active)
    np.add.at(counts, (r, sub[r, c]), 1.0)
    totals = active.sum(axis=1).astype(np.float64)
    has_votes = totals > 0
    probs = np.full((n, num_classes), 1.0 / num_classes, dtype=np.float64)
    probs[has_votes] = counts[has_votes] / totals[has_votes, None]
    return probs


# ---------------------------------------------------------------------------
# Exact nearest neighbors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeighborList:
    """K nearest training rows for one query: unique ids, distances ascending."""

    ids: np.ndarray
    distances: np.ndarray


class NeighborIndex:
    """Exact K-nearest-neighbor index with deterministic tie-breaking.

    Euclidean and manhattan queries go through a KD-tree; the tree's
    candidates are re-ranked with canonical distances and ties broken by
    ascending training-row index, so results match a brute-force scan
    exactly.  Cosine distance (1 - cosine similarity, with zero vectors at
    distance 1 from everything) is computed by a blocked dense scan over
    normalized vectors.
    """

    def __init__(self, train: np.ndarray, metric: str = "euclidean"):
        train = np.asarray(train, dtype=np.float64)
        if train.ndim != 2 or train.shape[0] < 1:
            raise ValueError("training features must be a non-empty 2-D matrix")
        if not np.isfinite(train).all():
            raise ValueError("training features contain non-finite values")
        self.metric = metric
        self._train = train
        self._n = train.shape[0]
        if metric == "euclidean":
            self._tree = cKDTree(train)
            self._p = 2
        elif metric == "manhattan":
            self._tree = cKDTree(train)
            self._p = 1
        elif metric == "cosine":
            self._tree = None
            norms = np.linalg.norm(train, axis=1)
            self._zero_rows = norms == 0.0
            safe = np.where(self._zero_rows, 1.0, norms)
            self._unit = train / safe[:, None]
            self._unit[self._zero_rows] = 0.0
        else:
            raise ValueError(f"unsupported metric {metric!r}")

    def __len__(self) -> int:
        return self._n

    def _canonical_distances(self, queries: np.ndarray, ids: np.ndarray) -> np.ndarray:
        """Distances computed the same way for tree and brute-force paths."""
        pts = self._train[ids]
        diff = pts - queries[:, None, :]
        if self.metric == "euclidean":
            return np.sqrt(np.einsum("qkd,qkd->qk", diff, diff))
        if self.metric == "manhattan":
            return np.abs(diff).sum(axis=2)
        raise AssertionError("canonical recomputation is only used for tree metrics")

    def query(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (ids, distances), each of shape (len(queries), k), distances
        non-decreasing and ties ordered by ascending training-row index."""
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if k < 1 or k > self._n:
            raise ValueError(f"k must be in 1..{self._n}, got {k}")
        if queries.shape[1] != self._train.shape[1]:
            raise ValueError(
                f"query dim {queries.shape[1]} != train dim {self._train.shape[1]}"
            )
        if self._tree is None:
            return self._query_cosine(queries, k)
        return self._query_tree(queries, k)

    def _query_tree(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        workers = worker_count()
        probe = min(k + 1, self._n)
        dist, ids = self._tree.query(queries, k=probe, p=self._p, workers=workers)
        dist = dist.reshape(len(queries), probe)
        ids = ids.reshape(len(queries), probe)

        out_ids = ids[:, :k].copy()
        out_dist = self._canonical_distances(queries, out_ids)
        order = np.lexsort((out_ids, out_dist), axis=1)
        out_ids = np.take_along_axis(out_ids, order, axis=1)
        out_dist = np.take_along_axis(out_dist, order, axis=1)

        if probe > k:
            # a boundary tie means the tree's choice of the k-th neighbor was
            # arbitrary; re-rank the full candidate ball for those queries
            kth = dist[:, k - 1]
            beyond = dist[:, k]
            risky = np.flatnonzero(beyond <= kth * (1.0 + _TIE_SLACK) + 1e-300)
            for q in risky:
                radius = kth[q] * (1.0 + _TIE_SLACK) + 1e-300
                cand = np.asarray(
                    self._tree.query_ball_point(queries[q], radius, p=self._p), dtype=np.int64
                )
                cd = self._canonical_distances(queries[q][None, :], cand[None, :])[0]
                pick = np.lexsort((cand, cd))[:k]
                out_ids[q] = cand[pick]
                out_dist[q] = cd[pick]
        return out_ids.astype(np.int64), out_dist

    def _query_cosine(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        nq = len(queries)
        out_ids = np.empty((nq, k), dtype=np.int64)
        out_dist = np.empty((nq, k), dtype=np.float64)
        qnorms = np.linalg.norm(queries, axis=1)
        block = max(1, int(2**22 // max(self._n, 1)))
        for start in range(0, nq, block):
            stop = min(nq, start + block)
            qn = qnorms[start:stop]
            qunit = np.where(qn[:, None] == 0.0, 0.0, queries[start:stop] / np.where(qn == 0.0, 1.0, qn)[:, None])
            dist = 1.0 - qunit @ self._unit.T
            dist[:, self._zero_rows] = 1.0
            dist[qn == 0.0, :] = 1.0
            idx = np.arange(self._n)[None, :].repeat(stop - start, axis=0)
            order = np.lexsort((idx, dist), axis=1)[:, :k]
            out_ids[start:stop] = order
            out_dist[start:stop] = np.take_along_axis(dist, order, axis=1)
        return out_ids, out_dist

    def neighbor_list(self, query: np.ndarray, k: int) -> NeighborList:
        ids, dist = self.query(np.atleast_2d(query), k)
        return NeighborList(ids=ids[0], distances=dist[0])


def build_index(train: np.ndarray, metric: str = "euclidean") -> NeighborIndex:
    """Build an exact neighbor index over training features."""
    return NeighborIndex(train, metric)


def neighbor_weights(distances: np.ndarray, weighting: str) -> np.ndarray:
    """Per-neighbor averaging weights: all-ones or 1/(distance + eps)."""
    if weighting == "uniform":
        return np.ones_like(distances)
    if weighting == "inverse-distance":
        return 1.0 / (distances + INVERSE_DISTANCE_EPS)
    raise ValueError(f"unsupported weighting {weighting!r}")


# ---------------------------------------------------------------------------
# Coalition accuracy
# ---------------------------------------------------------------------------


def _resolve_coalition(coalition: Iterable[int] | None, num_lfs: int) -> np.ndarray:
    if coalition is None:
        return np.arange(num_lfs, dtype=np.int64)
    cols = np.asarray(sorted(set(int(j) for j in coalition)), dtype=np.int64)
    if len(cols) and (cols[0] < 0 or cols[-1] >= num_lfs):
        raise ValueError(f"coalition members must be in 0..{num_lfs - 1}")
    return cols


def _class_probability_matrix(
    weak_entries: np.ndarray,
    cols: np.ndarray,
    ids: np.ndarray,
    num_classes: int,
) -> np.ndarray:
    """Majority-vote probabilities, shape (n_eval, k, C), for neighbor rows."""
    n_eval, k = ids.shape
    sub = weak_entries[ids.reshape(-1)][:, cols] if len(cols) else np.empty((n_eval * k, 0), dtype=np.int64)
    active = sub != ABSTAIN
    counts = np.zeros((n_eval * k, num_classes), dtype=np.float64)
    r, c = np.nonzero(active)
    np.add.at(counts, (r, sub[r, c]), 1.0)
    totals = active.sum(axis=1).astype(np.float64)
    probs = np.full((n_eval * k, num_classes), 1.0 / num_classes, dtype=np.float64)
    voted = totals > 0
    probs[voted] = counts[voted] / totals[voted, None]
    return probs.reshape(n_eval, k, num_classes)


def predict_proba(
    coalition: Iterable[int] | None,
    bundle: SplitBundle,
    config: ProxyConfig,
    eval_set: LabeledSet,
    index: NeighborIndex | None = None,
) -> np.ndarray:
    """Downstream class probabilities, shape (n_eval, C), for a coalition."""
    if len(eval_set) == 0:
        raise ValueError("eval set is empty")
    if config.k > bundle.num_train:
        raise ValueError(f"k={config.k} exceeds training size {bundle.num_train}")
    cols = _resolve_coalition(coalition, bundle.num_lfs)
    if index is None:
        index = build_index(bundle.train_features, config.metric)
    ids, dists = index.query(eval_set.features, config.k)
    om = neighbor_weights(dists, config.weighting)
    theta = _class_probability_matrix(bundle.weak_labels.entries, cols, ids, bundle.spec.num_classes)
    weighted = np.einsum("qk,qkc->qc", om, theta)
    return weighted / om.sum(axis=1)[:, None]


def soft_accuracy(
    coalition: Iterable[int] | None,
    bundle: SplitBundle,
    config: ProxyConfig,
    eval_set: LabeledSet,
    index: NeighborIndex | None = None,
) -> float:
    """Mean predicted probability of the true class over the eval set.

    The empty coalition yields exactly 1/C: every row votes uniformly.
    """
    cols = _resolve_coalition(coalition, bundle.num_lfs)
    if len(cols) == 0:
        if len(eval_set) == 0:
            raise ValueError("eval set is empty")
        if config.k > bundle.num_train:
            raise ValueError(f"k={config.k} exceeds training size {bundle.num_train}")
        return 1.0 / bundle.spec.num_classes
    probs = predict_proba(cols, bundle, config, eval_set, index)
    return float(np.mean(probs[np.arange(len(eval_set)), eval_set.labels]))


def hard_accuracy(
    coalition: Iterable[int] | None,
    bundle: SplitBundle,
    config: ProxyConfig,
    eval_set: LabeledSet,
    index: NeighborIndex | None = None,
) -> float:
    """Fraction of eval points whose argmax class is the true one; probability
    ties resolve toward the smallest class index."""
    probs = predict_proba(coalition, bundle, config, eval_set, index)
    preds = np.argmax(probs, axis=1)  # first maximum = smallest class on ties
    return float(np.mean(preds == eval_set.labels))


def coalition_utility(
    coalition: Iterable[int] | None,
    bundle: SplitBundle,
    config: ProxyConfig,
    index: NeighborIndex | None = None,
) -> float:
    """Soft validation accuracy gain over random guessing; exactly 0 for the
    empty coalition."""
    cols = _resolve_coalition(coalition, bundle.num_lfs)
    if len(cols) == 0:
        return 0.0
    acc = soft_accuracy(cols, bundle, config, bundle.valid, index)
    return acc - 1.0 / bundle.spec.num_classes
