"""Seeded synthetic scenes with known flood truth.

Terrain is a smooth surface (a tilted ramp, or a tilted base with Gaussian
hills), truth comes from flooding it with a flat water surface, and features
are drawn per pixel from one of two Gaussians. Two difficulty mechanisms
mirror what makes real scenes hard: a fraction of flooded pixels draw their
features from the dry distribution (canopy occlusion), and vertical strips
add a per-strip offset to every band (uneven illumination).

Randomness comes from PCG64 generators derived from SeedSequence(seed,
spawn_key=(k,)) with fixed stream ids: 0 terrain, 1 features, 2 canopy,
3 label withholding. Normals use Box-Muller on generator uniforms so the
draw sequence is pinned down by the stream alone. The same config therefore
produces byte-identical files.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError, UsageError
from .raster import DEFAULT_NODATA, Grid, SceneBundle, format_number, write_grid

_TERRAINS = ("ramp", "bumps")


@dataclass
class SynthConfig:
    nrows: int = 64
    ncols: int = 64
    seed: int = 0
    terrain: str = "bumps"
    bump_count: int = 5
    bump_amplitude: float = 4.0
    bump_width: float = 10.0
    water_level: float | None = None  # None resolves to the flood_quantile of the DEM
    flood_quantile: float = 0.35
    bands: int = 3
    mean_dry: float = 60.0
    mean_flood: float = 30.0
    noise_sigma: float = 5.0
    canopy_fraction: float = 0.0
    strip_count: int = 0
    strip_amplitude: float = 0.0
    label_noise: float = 0.9
    connectivity: int = 4

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise UsageError(f"grid shape {self.nrows}x{self.ncols} is empty")
        if self.terrain not in _TERRAINS:
            raise UsageError(
                f"terrain must be one of {', '.join(_TERRAINS)}, got {self.terrain!r}"
            )
        if self.bands < 1:
            raise UsageError(f"bands must be >= 1, got {self.bands}")
        if not 0.0 <= self.canopy_fraction <= 1.0:
            raise UsageError(f"canopy_fraction must be in [0, 1], got {self.canopy_fraction}")
        if not 0.0 <= self.label_noise <= 1.0:
            raise UsageError(f"label_noise must be in [0, 1], got {self.label_noise}")
        if not 0.0 <= self.flood_quantile <= 1.0:
            raise UsageError(f"flood_quantile must be in [0, 1], got {self.flood_quantile}")
        if self.water_level is not None and not math.isfinite(self.water_level):
            raise UsageError(f"water_level must be finite, got {self.water_level}")
        if self.noise_sigma <= 0:
            raise UsageError(f"noise_sigma must be > 0, got {self.noise_sigma}")
        if self.strip_count < 0:
            raise UsageError(f"strip_count must be >= 0, got {self.strip_count}")
        if self.bump_count < 0:
            raise UsageError(f"bump_count must be >= 0, got {self.bump_count}")
        if self.bump_width <= 0:
            raise UsageError(f"bump_width must be > 0, got {self.bump_width}")
        if self.connectivity not in (4, 8):
            raise UsageError(f"connectivity must be 4 or 8, got {self.connectivity}")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def _box_muller(gen: np.random.Generator, n: int) -> np.ndarray:
    """n standard normals from pairs of generator uniforms."""
    pairs = (n + 1) // 2
    u1 = 1.0 - gen.random(pairs)  # (0, 1]; log stays finite
    u2 = gen.random(pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return z[:n]


def _terrain(config: SynthConfig) -> np.ndarray:
    nr, nc = config.nrows, config.ncols
    rr, cc = np.meshgrid(np.arange(nr, dtype=np.float64), np.arange(nc, dtype=np.float64), indexing="ij")
    if config.terrain == "ramp":
        return rr + cc
    base = 10.0 * rr / max(nr - 1, 1) + 2.0 * cc / max(nc - 1, 1)
    gen = _rng(config.seed, 0)
    for _ in range(config.bump_count):
        r0 = gen.random() * nr
        c0 = gen.random() * nc
        d2 = (rr - r0) ** 2 + (cc - c0) ** 2
        base = base + config.bump_amplitude * np.exp(-d2 / (2.0 * config.bump_width**2))
    return base


def flat_flood_oracle(dem: Grid, water_level: float, connectivity: int = 4) -> Grid:
    """Flood everything reachable from each basin floor without climbing.

    Within each connected component of valid pixels, the pixels at the
    component's minimum elevation seed a fill that spreads through neighbours
    with elevation <= water_level. Below-level pockets cut off from their
    component's minimum by higher ground stay dry.
    """
    if connectivity not in (4, 8):
        raise UsageError(f"connectivity must be 4 or 8, got {connectivity}")
    if not math.isfinite(water_level) and not water_level == math.inf:
        raise UsageError(f"water_level must be finite or +inf, got {water_level}")
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    mask = dem.valid_mask()
    if not mask.any():
        raise DataError("DEM has no valid pixels")
    vals = dem.values
    comp, n_comp = ndimage.label(mask, structure=structure)
    ids = np.arange(1, n_comp + 1)
    mins = ndimage.minimum(np.where(mask, vals, np.inf), labels=comp, index=ids)
    if water_level < min(mins):
        warnings.warn(
            f"water level {water_level} is below every basin floor; nothing floods",
            stacklevel=2,
        )
    seeds = mask & (vals == np.asarray(mins)[comp - 1]) & (vals <= water_level)
    below, _ = ndimage.label(mask & (vals <= water_level), structure=structure)
    wet_regions = np.unique(below[seeds])
    flooded = np.isin(below, wet_regions[wet_regions > 0])
    out = np.where(mask, flooded.astype(np.float64), dem.nodata)
    return dem.with_values(out)


def _strip_offsets(config: SynthConfig) -> np.ndarray:
    """Per-column additive offset; strip offsets span [-amp, +amp] evenly."""
    if config.strip_count == 0:
        return np.zeros(config.ncols)
    if config.strip_count == 1:
        levels = np.zeros(1)
    else:
        levels = np.linspace(-config.strip_amplitude, config.strip_amplitude, config.strip_count)
    strip_of_col = (np.arange(config.ncols) * config.strip_count) // config.ncols
    return levels[strip_of_col]


def generate_scene(config: SynthConfig) -> tuple[SceneBundle, Grid, Grid]:
    """Build one scene; returns (bundle with partial labels, truth, canopy mask)."""
    elev = _terrain(config)
    dem = Grid(
        ncols=config.ncols,
        nrows=config.nrows,
        xllcorner=0.0,
        yllcorner=0.0,
        cellsize=1.0,
        nodata=DEFAULT_NODATA,
        values=elev,
    )
    if config.water_level is None:
        level = float(np.quantile(elev, config.flood_quantile))
    else:
        level = config.water_level
    truth = flat_flood_oracle(dem, level, config.connectivity)

    flood_idx = np.flatnonzero(truth.values.ravel() == 1.0)
    n_canopy = int(round(config.canopy_fraction * flood_idx.size))
    canopy_idx = flood_idx[_rng(config.seed, 2).permutation(flood_idx.size)[:n_canopy]]
    canopy_flat = np.zeros(elev.size, dtype=np.float64)
    canopy_flat[canopy_idx] = 1.0
    canopy = dem.with_values(canopy_flat.reshape(elev.shape))

    # Features: class Gaussian of the truth label, except canopy pixels draw
    # from the dry Gaussian; the draw order is row-major regardless of class.
    source_dry = (truth.values.ravel() == 0.0) | (canopy_flat == 1.0)
    means = np.where(source_dry, config.mean_dry, config.mean_flood)
    z = _box_muller(_rng(config.seed, 1), elev.size * config.bands)
    feats = means[:, None] + config.noise_sigma * z.reshape(elev.size, config.bands)
    feats += _strip_offsets(config)[np.tile(np.arange(config.ncols), config.nrows), None]
    bands = [dem.with_values(feats[:, b].reshape(elev.shape)) for b in range(config.bands)]

    n_withheld = int(round(config.label_noise * elev.size))
    withheld = _rng(config.seed, 3).permutation(elev.size)[:n_withheld]
    label_flat = truth.values.ravel().copy()
    label_flat[withheld] = DEFAULT_NODATA
    labels = dem.with_values(label_flat.reshape(elev.shape))

    scene = SceneBundle(dem=dem, bands=bands, labels=labels)
    return scene, truth, canopy


_MANIFEST_FILES = ("dem", "truth", "canopy", "labels")


def config_to_text(config: SynthConfig, resolved_level: float | None = None) -> str:
    """Manifest body: one 'key value' line per field, then the file names."""
    lines = []
    for f in fields(SynthConfig):
        value = getattr(config, f.name)
        if f.name == "water_level":
            value = resolved_level if value is None else value
        if f.name == "flood_quantile" and (config.water_level is not None or resolved_level is not None):
            continue  # inert once a concrete level is recorded; regeneration is exact
        if value is None:
            continue
        lines.append(f"{f.name} {format_number(value) if isinstance(value, float) else value}")
    for name in _MANIFEST_FILES:
        lines.append(f"file_{name} {name}.asc")
    for b in range(config.bands):
        lines.append(f"file_band_{b} band_{b}.asc")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> SynthConfig:
    """Parse a manifest or hand-written config back into a SynthConfig."""
    spec = {f.name: f.type for f in fields(SynthConfig)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("file_"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise DataError(f"config line {lineno}: expected 'key value', got {raw!r}")
        key, value = parts
        if key not in spec:
            raise DataError(f"config line {lineno}: unknown key {key!r}")
        try:
            if key == "terrain":
                kwargs[key] = value
            elif key in ("nrows", "ncols", "seed", "bump_count", "bands", "strip_count", "connectivity"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except ValueError as exc:
            raise DataError(f"config line {lineno}: bad value for {key}: {value!r}") from exc
    return SynthConfig(**kwargs)


def write_scene(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Generate and write the scene plus a manifest that regenerates it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene, truth, canopy = generate_scene(config)
    resolved = None
    if config.water_level is None:
        resolved = float(np.quantile(scene.dem.values, config.flood_quantile))
    paths = {}
    for name, grid in (("dem", scene.dem), ("truth", truth), ("canopy", canopy), ("labels", scene.labels)):
        paths[name] = out / f"{name}.asc"
        write_grid(paths[name], grid)
    for b, grid in enumerate(scene.bands):
        paths[f"band_{b}"] = out / f"band_{b}.asc"
        write_grid(paths[f"band_{b}"], grid)
    paths["manifest"] = out / "manifest.txt"
    paths["manifest"].write_text(config_to_text(config, resolved), encoding="ascii", newline="")
    return paths
