"""Per-vote Shapley tables for majority voting, built by dynamic programming.

For a single instance labeled by ``p`` correct and ``w`` wrong voters, the
Shapley value of each correct voter (``SV+``) and each wrong voter (``SV-``)
in the vote-accuracy game depends only on ``(p, w)`` and the class count, so
all values fit in two triangular tables of side ``max_size``.  The tables are
filled in O(max_size^2) by a recursion over who votes last; a direct
double-sum evaluation and an exhaustive permutation enumeration are kept as
independent reference paths for verification.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

_DIRECT_MAX = 40  # binomial ratios lose float64 accuracy well past this point
_PERM_MAX = 9


def psi(a: int, b: int, num_classes: int) -> float:
    """Marginal gain in vote accuracy when a correct voter joins ``a`` correct
    and ``b`` wrong prior voters; the first voter displaces a uniform guess."""
    if a < 0 or b < 0:
        raise ValueError(f"counts must be non-negative, got a={a}, b={b}")
    if a + b > 0:
        return (a + 1) / (a + b + 1) - a / (a + b)
    return 1.0 - 1.0 / num_classes


@dataclass(frozen=True)
class SVTables:
    """Triangular tables of SV+ / SV- over all (p, w) with p + w <= max_size.

    ``sv_plus[p, w]`` is defined for p >= 1 (and stored as 0 for p = 0, the
    null-player boundary); ``sv_minus[p, w]`` only for w >= 1.  Cells outside
    the triangle and the undefined ``sv_minus[:, 0]`` column hold NaN.
    """

    max_size: int
    num_classes: int
    sv_plus: np.ndarray
    sv_minus: np.ndarray

    def plus(self, p: int, w: int) -> float:
        if p < 0 or w < 0 or p + w > self.max_size:
            raise IndexError(f"SV+({p},{w}) outside table of size {self.max_size}")
        return float(self.sv_plus[p, w])

    def minus(self, p: int, w: int) -> float:
        if w < 1:
            raise ValueError(f"SV-({p},{w}) is undefined: it requires w >= 1")
        if p < 0 or p + w > self.max_size:
            raise IndexError(f"SV-({p},{w}) outside table of size {self.max_size}")
        return float(self.sv_minus[p, w])


def build_tables(max_size: int, num_classes: int) -> SVTables:
    """Fill the SV+ table by the last-voter recursion and derive SV- from the
    efficiency identity ``p*SV+ + w*SV- = p/(p+w) - 1/C``.

    The recursion runs along anti-diagonals (cells with equal p + w), each of
    which depends only on the previous one, so the whole table costs
    O(max_size^2).
    """
    if max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")

    M = max_size
    C = num_classes
    svp = np.full((M + 1, M + 1), np.nan, dtype=np.float64)
    svp[0, : M + 1] = 0.0  # a voter among zero correct voters contributes nothing

    for s in range(1, M + 1):
        svp[s, 0] = (C - 1) / (C * s)
        if s == 1:
            continue
        p = np.arange(1, s, dtype=np.float64)
        w = s - p
        # last voter is the target, another correct voter, or a wrong voter
        psi_last = p / s - (p - 1) / (s - 1)
        pi = p.astype(np.intp)
        svp[pi, s - pi] = (
            psi_last / s
            + (p - 1) / s * svp[pi - 1, s - pi]
            + w / s * svp[pi, s - pi - 1]
        )

    svm = np.full((M + 1, M + 1), np.nan, dtype=np.float64)
    pg, wg = np.meshgrid(np.arange(M + 1), np.arange(M + 1), indexing="ij")
    inside = (wg >= 1) & (pg + wg <= M)
    pf = pg[inside].astype(np.float64)
    wf = wg[inside].astype(np.float64)
    svm[inside] = (pf / (pf + wf) - 1.0 / C - pf * svp[inside]) / wf

    svp.flags.writeable = False
    svm.flags.writeable = False
    return SVTables(max_size=M, num_classes=C, sv_plus=svp, sv_minus=svm)


def sv_plus_direct(p: int, w: int, num_classes: int) -> float:
    """Direct double-sum evaluation of SV+ with log-space binomial ratios.

    Reference path only; guarded to p + w <= 40 where float64 evaluation is
    stable.
    """
    if p < 1 or w < 0:
        raise ValueError(f"requires p >= 1 and w >= 0, got p={p}, w={w}")
    if p + w > _DIRECT_MAX:
        raise ValueError(f"p + w = {p + w} exceeds the direct-evaluation guard {_DIRECT_MAX}")

    i = np.arange(p, dtype=np.float64)[:, None]
    j = np.arange(w + 1, dtype=np.float64)[None, :]
    log_ratio = (
        _log_comb(p - 1, i) + _log_comb(w, j) - _log_comb(p + w - 1, i + j)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        psi_ij = np.where(i + j > 0, (i + 1) / (i + j + 1) - i / np.maximum(i + j, 1), 1.0 - 1.0 / num_classes)
    return float(np.sum(psi_ij * np.exp(log_ratio)) / (p + w))


def _log_comb(n: float | np.ndarray, k: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


# ---------------------------------------------------------------------------
# Exhaustive permutation oracle (test reference)
# ---------------------------------------------------------------------------

_perm_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _permutations_of(size: int) -> tuple[np.ndarray, np.ndarray]:
    """All size! permutations of range(size) plus the position of element 0."""
    cached = _perm_cache.get(size)
    if cached is None:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.permutations(range(size))),
            dtype=np.int8,
            count=size * math.factorial(size),
        )
        perms = flat.reshape(-1, size)
        pos0 = np.argmax(perms == 0, axis=1)
        cached = (perms, pos0)
        _perm_cache[size] = cached
    return cached


_hist_cache: dict[tuple[int, int], np.ndarray] = {}


def _predecessor_histogram(p: int, w: int) -> np.ndarray:
    """Count, over every ordering of p correct and w wrong voters, how many
    correct/wrong voters precede a designated correct voter."""
    key = (p, w)
    hist = _hist_cache.get(key)
    if hist is None:
        size = p + w
        perms, pos0 = _permutations_of(size)
        col = np.arange(size, dtype=np.int8)[None, :]
        before = col < pos0[:, None]
        ncorr = ((perms < p) & before).sum(axis=1)
        nwrong = pos0 - ncorr
        hist = np.zeros((p, w + 1), dtype=np.float64)
        np.add.at(hist, (ncorr, nwrong), 1.0)
        _hist_cache[key] = hist
    return hist


def sv_plus_permutation_oracle(p: int, w: int, num_classes: int) -> float:
    """Average marginal utility of a designated correct voter over all
    (p+w)! voter orderings, enumerated exhaustively.  Test reference only."""
    if p < 1 or w < 0:
        raise ValueError(f"requires p >= 1 and w >= 0, got p={p}, w={w}")
    if p + w > _PERM_MAX:
        raise ValueError(f"p + w = {p + w} exceeds the enumeration guard {_PERM_MAX}")
    hist = _predecessor_histogram(p, w)
    total = 0.0
    for a in range(p):
        for b in range(w + 1):
            if hist[a, b]:
                total += hist[a, b] * psi(a, b, num_classes)
    return total / hist.sum()
