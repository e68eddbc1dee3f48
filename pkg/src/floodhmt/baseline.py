"""Per-pixel Gaussian classifier and neighbourhood label smoothing.

The comparison method ignores the flow structure entirely: each valid pixel
gets the class with the higher prior-weighted density, optionally followed by
a few rounds of majority voting over the 4-neighbourhood. It shares the
Gaussian parameters with the tree model so the gap between the two is due to
structure, not fitting.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .model import ModelParams, local_log_density
from .raster import Grid, SceneBundle


def pixelwise_classify(scene: SceneBundle, params: ModelParams) -> Grid:
    """Argmax of log prior plus class log-density per valid pixel, tie to dry."""
    mask = scene.valid_mask()
    rows, cols = np.nonzero(mask)
    feats = scene.features(rows, cols)
    logd = local_log_density(params, feats)
    score0 = np.log1p(-params.pi) + logd[:, 0]
    score1 = np.log(params.pi) + logd[:, 1]
    out = np.full(mask.shape, scene.dem.nodata, dtype=np.float64)
    out[rows, cols] = (score1 > score0).astype(np.float64)
    return scene.dem.with_values(out)


def label_propagation_smooth(grid: Grid, iterations: int = 10) -> Grid:
    """Majority vote of each valid pixel and its valid 4-neighbours.

    All pixels update simultaneously each round; a tied vote keeps the current
    label. Stops early once a round changes nothing.
    """
    if iterations < 0:
        raise UsageError(f"iterations must be >= 0, got {iterations}")
    mask = grid.valid_mask()
    vals = grid.values
    bad = mask & ~np.isin(vals, (0.0, 1.0))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise UsageError(
            f"smoothing needs class labels 0 or 1, found {vals[r, c]} at "
            f"row {r} col {c}"
        )
    labels = np.where(mask, vals, 0.0).astype(np.int64)
    imask = mask.astype(np.int64)
    for _ in range(iterations):
        flood = labels * imask
        votes = flood.copy()
        voters = imask.copy()
        for src, dst in (
            ((slice(1, None), slice(None)), (slice(None, -1), slice(None))),
            ((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
            ((slice(None), slice(1, None)), (slice(None), slice(None, -1))),
            ((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
        ):
            votes[dst] += flood[src]
            voters[dst] += imask[src]
        new = np.where(2 * votes > voters, 1, np.where(2 * votes < voters, 0, labels))
        new = np.where(mask, new, labels)
        if np.array_equal(new, labels):
            break
        labels = new
    out = np.where(mask, labels.astype(np.float64), grid.nodata)
    return grid.with_values(out)
