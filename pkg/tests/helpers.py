"""Shared grid builders for the test suite."""

import numpy as np

from floodhmt import Grid


def make_grid(values, ncols=None, nrows=None, nodata=-9999.0, **kw):
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals.reshape(1, -1)
    defaults = dict(
        ncols=ncols or vals.shape[1],
        nrows=nrows or vals.shape[0],
        xllcorner=0.0,
        yllcorner=0.0,
        cellsize=1.0,
        nodata=nodata,
    )
    defaults.update(kw)
    return Grid(values=vals, **defaults)
