"""Synthetic in-scope / out-of-scope feature sets for tests and demo scripts.

In-scope rows are N(0, 1)^d and out-of-scope rows N(shift, 1)^d. The model
is taken to be right exactly on in-scope rows, so ``correct`` doubles as the
in-scope indicator.
"""

from __future__ import annotations

import numpy as np

from .features import FeatureMatrix


def gaussian(rng, rows, d, shift=0.0):
    return rng.normal(shift, 1.0, size=(rows, d))


def labelled_mix(rng, n_in, n_out, d, shift=3.0) -> FeatureMatrix:
    data = np.vstack((gaussian(rng, n_in, d), gaussian(rng, n_out, d, shift)))
    correct = np.concatenate((np.ones(n_in, dtype=int), np.zeros(n_out, dtype=int)))
    order = rng.permutation(len(correct))
    return FeatureMatrix(data[order], correct[order])


def ramp_stream(rng, n_windows, window, d, shift=3.0) -> FeatureMatrix:
    """Consecutive windows whose out-of-scope share climbs linearly from 0 to 1."""
    blocks, labels = [], []
    for w in range(n_windows):
        n_out = int(round(window * w / max(n_windows - 1, 1)))
        block = labelled_mix(rng, window - n_out, n_out, d, shift)
        blocks.append(block.data)
        labels.append(block.correct)
    return FeatureMatrix(np.vstack(blocks), np.concatenate(labels))
