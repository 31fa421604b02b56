"""Shared builders for the test suite: tiny in-memory datasets and views."""

import numpy as np

from fairadv.data import LabeledDataset, SplitView


def cell_arrays(n, seed=0, d=4):
    """Random features plus (y, a) assignments cycling through all 4 cells."""
    rng = np.random.default_rng(seed)
    features = rng.uniform(0.0, 1.0, size=(n, d))
    labels = np.array([(i // 2) % 2 for i in range(n)], dtype=np.int64)
    sensitive = np.array([i % 2 for i in range(n)], dtype=np.int64)
    return features, labels, sensitive


def toy_view(n=40, seed=0, d=4) -> SplitView:
    features, labels, sensitive = cell_arrays(n, seed, d)
    return SplitView(features=features, labels=labels, sensitive=sensitive,
                     column_names=tuple(f"x{j}" for j in range(d)),
                     frozen_mask=np.zeros(d, dtype=bool))


def toy_dataset(n_train=40, n_test=24, seed=0, d=4) -> LabeledDataset:
    """All four (y, a) cells populated in both splits."""
    n = n_train + n_test
    features, labels, sensitive = cell_arrays(n, seed, d)
    split = np.array(["train"] * n_train + ["test"] * n_test)
    return LabeledDataset(features=features, labels=labels,
                          sensitive=sensitive, split=split,
                          column_names=tuple(f"x{j}" for j in range(d)))


def random_cell_soft(rng, sizes=None):
    """(soft, y, a) with every (y, a) cell non-empty; sizes per cell."""
    if sizes is None:
        sizes = rng.integers(1, 8, size=4)
    soft, labels, sensitive = [], [], []
    for (y, a), m in zip(((0, 0), (0, 1), (1, 0), (1, 1)), sizes):
        soft.extend(rng.uniform(0.0, 1.0, size=m))
        labels.extend([y] * int(m))
        sensitive.extend([a] * int(m))
    return (np.array(soft), np.array(labels, dtype=np.int64),
            np.array(sensitive, dtype=np.int64))
