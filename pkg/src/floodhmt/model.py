"""Two-class Gaussian observation model.

Class 0 is dry, class 1 flood. Parameters are the flood prior pi at parentless
nodes, the flood persistence rho (probability a node stays flooded when all of
its parents are), and per-class Gaussian mean/covariance over the feature
bands. Densities are evaluated through Cholesky factors; covariances carry an
additive diagonal regulariser so nearly-degenerate labeled samples stay usable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DataError, ParameterError
from .raster import format_number

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class ModelParams:
    pi: float
    rho: float
    mu: np.ndarray  # (2, D)
    sigma: np.ndarray  # (2, D, D)
    reg_epsilon: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.ndim != 2 or self.mu.shape[0] != 2:
            raise ParameterError(f"mu must have shape (2, D), got {self.mu.shape}")
        d = self.mu.shape[1]
        if self.sigma.shape != (2, d, d):
            raise ParameterError(
                f"sigma must have shape (2, {d}, {d}), got {self.sigma.shape}"
            )
        if not (0.0 < self.pi < 1.0):
            raise ParameterError(f"pi must lie in (0, 1), got {self.pi}")
        if not (0.5 <= self.rho < 1.0):
            raise ParameterError(f"rho must lie in [0.5, 1), got {self.rho}")
        if not (self.reg_epsilon > 0.0):
            raise ParameterError(f"reg_epsilon must be positive, got {self.reg_epsilon}")

    @property
    def ndim(self) -> int:
        return self.mu.shape[1]


def _cholesky(params: ModelParams, c: int) -> tuple[np.ndarray, float]:
    try:
        chol = np.linalg.cholesky(params.sigma[c])
    except np.linalg.LinAlgError:
        raise ParameterError(
            f"covariance for class {c} is not positive definite"
        ) from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return chol, logdet


def local_log_density(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Gaussian log density of feature vectors under both classes.

    x may be a single (D,) vector or an (N, D) matrix; the result has a
    trailing axis of length 2 ordered (dry, flood).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = params.ndim
    if pts.shape[1] != d:
        raise ParameterError(f"features have {pts.shape[1]} bands, model has {d}")
    out = np.empty((pts.shape[0], 2))
    for c in (0, 1):
        chol, logdet = _cholesky(params, c)
        diff = pts - params.mu[c]
        y = solve_triangular(chol, diff.T, lower=True)
        out[:, c] = -0.5 * (d * _LOG_2PI + logdet + np.sum(y * y, axis=0))
    return out[0] if single else out


def fit_initial_params(
    features: np.ndarray,
    labels: np.ndarray,
    rho: float = 0.99,
    reg_scale: float = 1e-6,
) -> ModelParams:
    """Supervised initialisation from labeled feature vectors.

    Per class: sample mean and biased covariance plus reg_epsilon * I, where
    reg_epsilon = reg_scale times the mean raw covariance diagonal (floored at
    1e-12 so fully degenerate samples still yield an SPD matrix). pi is the
    labeled flood fraction clamped to [0.01, 0.99]; rho is taken as given.
    Each class needs at least two labeled pixels; D + 1 or more per class is
    recommended, but the regulariser keeps smaller samples usable.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise DataError(f"features must be (N, D), got shape {features.shape}")
    if labels.shape != (features.shape[0],):
        raise DataError("labels must be one value per feature row")
    d = features.shape[1]
    mu = np.empty((2, d))
    raw = np.empty((2, d, d))
    for c in (0, 1):
        pts = features[labels == c]
        if pts.shape[0] < 2:
            raise DataError(
                f"class {c} has {pts.shape[0]} labeled pixels; need at least 2"
            )
        mu[c] = pts.mean(axis=0)
        diff = pts - mu[c]
        raw[c] = diff.T @ diff / pts.shape[0]
    eps = max(reg_scale * float(np.mean([np.diag(raw[c]) for c in (0, 1)])), 1e-12)
    sigma = raw + eps * np.eye(d)
    pi = float(np.clip(np.mean(labels == 1), 0.01, 0.99))
    return ModelParams(pi=pi, rho=rho, mu=mu, sigma=sigma, reg_epsilon=eps)


def params_to_text(params: ModelParams) -> str:
    """Line-oriented 'key = value(s)' serialization, exact round trip."""
    lines = [
        f"pi = {format_number(params.pi)}",
        f"rho = {format_number(params.rho)}",
    ]
    for c in (0, 1):
        lines.append(f"mu{c} = " + " ".join(format_number(v) for v in params.mu[c]))
    for c in (0, 1):
        for r in range(params.ndim):
            lines.append(
                f"sigma{c}_row{r} = "
                + " ".join(format_number(v) for v in params.sigma[c, r])
            )
    lines.append(f"reg_epsilon = {format_number(params.reg_epsilon)}")
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> ModelParams:
    entries: dict[str, list[float]] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"params line {ln}: expected 'key = value(s)'")
        key, _, rest = line.partition("=")
        try:
            entries[key.strip()] = [float(tok) for tok in rest.split()]
        except ValueError:
            raise DataError(f"params line {ln}: non-numeric value") from None
    try:
        d = len(entries["mu0"])
        mu = np.array([entries["mu0"], entries["mu1"]])
        sigma = np.array(
            [
                [entries[f"sigma{c}_row{r}"] for r in range(d)]
                for c in (0, 1)
            ]
        )
        return ModelParams(
            pi=entries["pi"][0],
            rho=entries["rho"][0],
            mu=mu,
            sigma=sigma,
            reg_epsilon=entries["reg_epsilon"][0],
        )
    except KeyError as exc:
        raise DataError(f"params text missing key {exc.args[0]!r}") from None
