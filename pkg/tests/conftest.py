import itertools

import numpy as np
import pytest

from weshap.data import ABSTAIN, LabeledSet, ProxyConfig, SplitBundle, TaskSpec, WeakLabelMatrix
from weshap.evaluate import running_example


@pytest.fixture(scope="session")
def example_bundle() -> SplitBundle:
    return running_example()


@pytest.fixture(scope="session")
def example_config() -> ProxyConfig:
    return ProxyConfig(k=3)


def random_bundle(rng: np.random.Generator, n: int, d: int, m: int, n_val: int, C: int) -> SplitBundle:
    """Random instance with mixed coverage; features standard normal."""
    train = rng.standard_normal((n, d))
    entries = np.full((n, m), ABSTAIN, dtype=np.int64)
    active = rng.random((n, m)) < rng.uniform(0.2, 0.7)
    entries[active] = rng.integers(C, size=int(active.sum()))
    valid = LabeledSet(rng.standard_normal((n_val, d)), rng.integers(C, size=n_val))
    return SplitBundle(
        train_features=train,
        weak_labels=WeakLabelMatrix(entries),
        valid=valid,
        spec=TaskSpec(num_classes=C),
    )


CONFIG_GRID = list(
    itertools.product(("euclidean", "manhattan", "cosine"), ("uniform", "inverse-distance"))
)


def randomized_instances(count: int, seed: int = 2024):
    """Shared generator for the engine-vs-oracle equivalence instances."""
    rng = np.random.default_rng(seed)
    for trial in range(count):
        n = int(rng.integers(20, 201))
        d = int(rng.integers(1, 9))
        m = int(rng.integers(2, 11))
        n_val = int(rng.integers(2, 51))
        C = int(rng.choice([2, 3]))
        k = int(rng.integers(1, min(n, 25) + 1))
        metric, weighting = CONFIG_GRID[trial % len(CONFIG_GRID)]
        bundle = random_bundle(rng, n, d, m, n_val, C)
        yield trial, bundle, ProxyConfig(k=k, metric=metric, weighting=weighting)


def brute_force_knn(train: np.ndarray, query: np.ndarray, k: int, metric: str) -> np.ndarray:
    """Independent exact KNN: full scan, sort by (distance, row index)."""
    if metric == "euclidean":
        dist = np.sqrt(((train - query) ** 2).sum(axis=1))
    elif metric == "manhattan":
        dist = np.abs(train - query).sum(axis=1)
    elif metric == "cosine":
        # canonical definition: unit-normalize, then 1 - dot
        tn = np.linalg.norm(train, axis=1)
        qn = np.linalg.norm(query)
        unit = train / np.where(tn == 0, 1.0, tn)[:, None]
        unit[tn == 0] = 0.0
        if qn == 0:
            dist = np.ones(len(train))
        else:
            dist = 1.0 - unit @ (query / qn)
            dist[tn == 0] = 1.0
    else:
        raise ValueError(metric)
    order = np.lexsort((np.arange(len(train)), dist))
    return order[:k]
