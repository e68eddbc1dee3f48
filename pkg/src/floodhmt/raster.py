"""Gridded raster I/O.

Grids travel as ESRI ASCII text: six ``KEY value`` header lines (ncols, nrows,
xllcorner, yllcorner, cellsize, NODATA_value) followed by nrows rows of ncols
whitespace-separated numbers, northernmost row first. Cell values are float64
throughout. Nodata matching is exact bit equality on the stored double, so
``-0.0`` does not match ``0.0`` and a NaN nodata value matches NaN cells.

Writing is canonical: integer-valued cells are rendered without a decimal
point, everything else with Python's shortest round-trip repr, single spaces,
``\\n`` line endings. ``write -> parse -> write`` is byte-identical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError, GridParseError

DEFAULT_NODATA = -9999.0

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")

# class -> RGB used by write_ppm unless a palette is supplied
DEFAULT_PALETTE = {0: (165, 120, 80), 1: (60, 100, 200), "nodata": (0, 0, 0)}


def format_number(v: float) -> str:
    """Canonical text form of one cell value (round-trips bit-exactly)."""
    v = float(v)
    if v.is_integer() and not (v == 0.0 and math.copysign(1.0, v) < 0.0):
        return str(int(v))
    return repr(v)


def _bits(values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float64).view(np.uint64)


def bit_equal(values: np.ndarray, scalar: float) -> np.ndarray:
    """Elementwise exact-bit comparison of float64 values against a scalar."""
    target = np.float64(scalar).view(np.uint64)
    return _bits(values) == target


@dataclass
class Grid:
    """One single-band raster with its georeference header."""

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise DataError(f"grid dimensions must be >= 1, got {self.nrows}x{self.ncols}")
        if not (self.cellsize > 0):
            raise DataError(f"cellsize must be positive, got {self.cellsize}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.nrows, self.ncols):
            if vals.size == self.nrows * self.ncols:
                vals = vals.reshape(self.nrows, self.ncols)
            else:
                raise DataError(
                    f"expected {self.nrows * self.ncols} values, got {vals.size}"
                )
        self.values = vals

    def valid_mask(self) -> np.ndarray:
        """Boolean (nrows, ncols) mask of cells that are not nodata."""
        return ~bit_equal(self.values, self.nodata).reshape(self.nrows, self.ncols)

    def geometry(self) -> tuple:
        """Header fields identifying the pixel lattice, floats by bit pattern."""
        return (
            self.ncols,
            self.nrows,
            np.float64(self.xllcorner).view(np.uint64).item(),
            np.float64(self.yllcorner).view(np.uint64).item(),
            np.float64(self.cellsize).view(np.uint64).item(),
        )

    def with_values(self, values: np.ndarray, nodata: float | None = None) -> "Grid":
        """New grid on the same lattice holding `values`."""
        return Grid(
            ncols=self.ncols,
            nrows=self.nrows,
            xllcorner=self.xllcorner,
            yllcorner=self.yllcorner,
            cellsize=self.cellsize,
            nodata=self.nodata if nodata is None else nodata,
            values=np.asarray(values, dtype=np.float64),
        )

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.geometry() == other.geometry()
            and np.float64(self.nodata).view(np.uint64) == np.float64(other.nodata).view(np.uint64)
            and bool(np.all(_bits(self.values) == _bits(other.values)))
        )


def _geometry_mismatches(a: Grid, b: Grid) -> list[str]:
    fields = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
    out = []
    for name, va, vb in zip(fields, a.geometry(), b.geometry()):
        if va != vb:
            out.append(f"{name}: {getattr(a, name)} != {getattr(b, name)}")
    return out


def check_aligned(named_grids: list[tuple[str, Grid]]) -> None:
    """Raise AlignmentError naming the grids and fields that disagree."""
    ref_name, ref = named_grids[0]
    for name, g in named_grids[1:]:
        diffs = _geometry_mismatches(ref, g)
        if diffs:
            raise AlignmentError(f"{name} does not align with {ref_name}: " + "; ".join(diffs))


@dataclass
class SceneBundle:
    """Co-registered DEM + feature bands (+ optional labels) for one scene.

    A pixel is valid iff the DEM and every band are non-nodata there. Labels,
    when present, hold 0 (dry), 1 (flood), or nodata (unlabeled).
    """

    dem: Grid
    bands: list[Grid]
    labels: Grid | None = None

    def __post_init__(self):
        if len(self.bands) < 1:
            raise DataError("a scene needs at least one feature band")
        named = [("dem", self.dem)] + [(f"band[{i}]", b) for i, b in enumerate(self.bands)]
        if self.labels is not None:
            named.append(("labels", self.labels))
        check_aligned(named)
        if self.labels is not None:
            lv = self.labels.values[self.labels.valid_mask()]
            bad = lv[(lv != 0.0) & (lv != 1.0)]
            if bad.size:
                raise DataError(f"labels must be 0, 1, or nodata; found {bad.flat[0]!r}")

    def valid_mask(self) -> np.ndarray:
        mask = self.dem.valid_mask()
        for band in self.bands:
            mask &= band.valid_mask()
        return mask

    def valid_count(self) -> int:
        return int(self.valid_mask().sum())

    def features(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """(len(rows), n_bands) feature matrix sampled at the given pixels."""
        return np.stack([band.values[rows, cols] for band in self.bands], axis=1)


def parse_ascii_grid(text: str) -> Grid:
    """Parse ESRI ASCII grid text. Errors name the offending 1-based line."""
    lines = text.splitlines()
    header: dict[str, float] = {}
    idx = 0
    for key in _HEADER_KEYS:
        parts = lines[idx].split() if idx < len(lines) else []
        if len(parts) != 2 or parts[0].lower() != key:
            if key == "nodata_value":
                header[key] = DEFAULT_NODATA
                break
            raise GridParseError(f"line {idx + 1}: expected '{key} <value>' header")
        try:
            header[key] = int(parts[1]) if key in ("ncols", "nrows") else float(parts[1])
        except ValueError:
            raise GridParseError(f"line {idx + 1}: bad value for {key}: {parts[1]!r}") from None
        idx += 1

    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if ncols < 1 or nrows < 1:
        raise GridParseError(f"line 1: grid dimensions must be >= 1, got {nrows}x{ncols}")
    expected = ncols * nrows

    chunks: list[np.ndarray] = []
    count = 0
    for ln in range(idx, len(lines)):
        tokens = lines[ln].split()
        if not tokens:
            continue
        try:
            vals = np.array(tokens, dtype=np.float64)
        except ValueError:
            bad = next(t for t in tokens if not _is_number(t))
            raise GridParseError(f"line {ln + 1}: non-numeric value {bad!r}") from None
        count += vals.size
        if count > expected:
            raise GridParseError(
                f"line {ln + 1}: more than the expected {expected} values"
            )
        chunks.append(vals)
    if count != expected:
        raise GridParseError(
            f"line {len(lines)}: expected {expected} values, found {count}"
        )

    values = np.concatenate(chunks) if chunks else np.empty(0)
    return Grid(
        ncols=ncols,
        nrows=nrows,
        xllcorner=float(header["xllcorner"]),
        yllcorner=float(header["yllcorner"]),
        cellsize=float(header["cellsize"]),
        nodata=float(header["nodata_value"]),
        values=values.reshape(nrows, ncols),
    )


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def write_ascii_grid(grid: Grid) -> str:
    """Render a Grid in the canonical ASCII form (see module docstring)."""
    head = (
        f"ncols {grid.ncols}\n"
        f"nrows {grid.nrows}\n"
        f"xllcorner {format_number(grid.xllcorner)}\n"
        f"yllcorner {format_number(grid.yllcorner)}\n"
        f"cellsize {format_number(grid.cellsize)}\n"
        f"NODATA_value {format_number(grid.nodata)}\n"
    )
    body = "\n".join(" ".join(format_number(v) for v in row) for row in grid.values)
    return head + body + "\n"


def read_grid(path: str | os.PathLike) -> Grid:
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    try:
        return parse_ascii_grid(text)
    except GridParseError as exc:
        raise GridParseError(f"{path}: {exc}") from None


def write_grid(path: str | os.PathLike, grid: Grid) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(write_ascii_grid(grid))


def load_scene(dem_path, band_paths, labels_path=None) -> SceneBundle:
    """Read and alignment-check a scene; alignment errors name the files."""
    dem = read_grid(dem_path)
    bands = [read_grid(p) for p in band_paths]
    labels = read_grid(labels_path) if labels_path is not None else None
    named = [(str(dem_path), dem)] + [(str(p), g) for p, g in zip(band_paths, bands)]
    if labels is not None:
        named.append((str(labels_path), labels))
    check_aligned(named)
    bundle = SceneBundle(dem=dem, bands=bands, labels=labels)
    return bundle


def write_ppm(grid: Grid, palette: dict | None = None) -> bytes:
    """Render a class map (values 0/1/nodata) as a binary P6 PPM.

    Any valid value other than 0 or 1 is an error.
    """
    pal = DEFAULT_PALETTE if palette is None else palette
    valid = grid.valid_mask()
    vals = grid.values
    bad = valid & (vals != 0.0) & (vals != 1.0)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"class map holds non-class value {vals[r, c]!r} at ({r}, {c})")
    img = np.empty((grid.nrows, grid.ncols, 3), dtype=np.uint8)
    img[~valid] = pal["nodata"]
    img[valid & (vals == 0.0)] = pal[0]
    img[valid & (vals == 1.0)] = pal[1]
    header = f"P6\n{grid.ncols} {grid.nrows}\n255\n".encode("ascii")
    return header + img.tobytes()
