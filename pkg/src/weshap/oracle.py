"""Brute-force exact Shapley values over the proxy game, for verification.

Two independent formulations: averaging marginal contributions over every
permutation of the LF set, and the weighted sum over all subsets.  Both are
exponential and exist only to check the fast engine; utilities are memoized
by coalition bitmask so each coalition is evaluated exactly once.
"""

from __future__ import annotations

from math import comb, factorial
from typing import Callable

import numpy as np

from .data import ProxyConfig, SplitBundle
from .proxy import NeighborIndex, build_index, coalition_utility

_SUBSET_MAX = 12
_PERM_MAX = 8


class ProxyGame:
    """Cooperative game over LFs with utilities cached by coalition bitmask."""

    def __init__(self, num_players: int, utility: Callable[[tuple[int, ...]], float]):
        if num_players < 1:
            raise ValueError("a game needs at least one player")
        self.num_players = num_players
        self._utility = utility
        self._cache: dict[int, float] = {}

    @classmethod
    def from_bundle(
        cls, bundle: SplitBundle, config: ProxyConfig, index: NeighborIndex | None = None
    ) -> "ProxyGame":
        idx = index if index is not None else build_index(bundle.train_features, config.metric)

        def utility(players: tuple[int, ...]) -> float:
            return coalition_utility(players, bundle, config, idx)

        return cls(bundle.num_lfs, utility)

    def members(self, mask: int) -> tuple[int, ...]:
        return tuple(j for j in range(self.num_players) if mask >> j & 1)

    def value(self, mask: int) -> float:
        cached = self._cache.get(mask)
        if cached is None:
            cached = float(self._utility(self.members(mask)))
            self._cache[mask] = cached
        return cached


def exact_shapley_subsets(game: ProxyGame) -> np.ndarray:
    """Shapley values via the subset sum: for each player j, average the
    marginal v(S + j) - v(S) over subset sizes with binomial weights."""
    m = game.num_players
    if m > _SUBSET_MAX:
        raise ValueError(f"subset enumeration is limited to {_SUBSET_MAX} players, got {m}")
    values = np.zeros(m, dtype=np.float64)
    full = 1 << m
    for j in range(m):
        bit = 1 << j
        total = 0.0
        for mask in range(full):
            if mask & bit:
                continue
            size = mask.bit_count()
            total += (game.value(mask | bit) - game.value(mask)) / comb(m - 1, size)
        values[j] = total / m
    return values


def exact_shapley_permutations(game: ProxyGame) -> np.ndarray:
    """Shapley values as the average marginal contribution over all m!
    orderings of the player set."""
    m = game.num_players
    if m > _PERM_MAX:
        raise ValueError(f"permutation enumeration is limited to {_PERM_MAX} players, got {m}")
    from itertools import permutations

    totals = np.zeros(m, dtype=np.float64)
    for perm in permutations(range(m)):
        mask = 0
        for j in perm:
            with_j = mask | (1 << j)
            totals[j] += game.value(with_j) - game.value(mask)
            mask = with_j
    return totals / factorial(m)
