"""Expectation-maximisation over the flow-dependency tree.

Each iteration runs exact sum-product under the current parameters, then
re-estimates them in closed form from the posteriors: Gaussian moments are
posterior-weighted over all nodes, pi over source nodes only (the parentless
ones are the only places the prior enters the joint), and rho from the
per-node joint of (class, parent-AND) over non-source nodes. Labels never
enter here; supervision only sets the initial parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, UsageError
from .flowtree import FlowTree
from .infer import Evidence, Posteriors, sum_product
from .model import ModelParams, local_log_density
from .raster import format_number


@dataclass
class EmConfig:
    max_iters: int = 50
    tol: float = 1e-6  # relative loglik gain below which we stop
    fix_gaussians: bool = False
    rho_floor: float = 0.5
    rho_ceiling: float = 1.0 - 1e-6
    pi_floor: float = 0.01
    pi_ceiling: float = 0.99

    def __post_init__(self):
        if self.max_iters < 1:
            raise UsageError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise UsageError(f"tol must be > 0, got {self.tol}")


@dataclass
class EmTrace:
    logliks: list[float] = field(default_factory=list)
    d_rho: list[float] = field(default_factory=list)
    d_pi: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def lines(self) -> str:
        """'iter loglik d_rho d_pi' rows, full precision, for plotting."""
        rows = [
            f"{i + 1} {format_number(ll)} {format_number(dr)} {format_number(dp)}"
            for i, (ll, dr, dp) in enumerate(zip(self.logliks, self.d_rho, self.d_pi))
        ]
        return "\n".join(rows) + "\n"


def m_step(
    tree: FlowTree,
    features: np.ndarray,
    posteriors: Posteriors,
    prev: ModelParams,
    config: EmConfig | None = None,
) -> tuple[ModelParams, list[str]]:
    """Closed-form parameter update from sum-product posteriors.

    Denominators below 1e-12 leave the corresponding parameter at its
    previous value; the returned flags name any parameter so held.
    """
    config = config or EmConfig()
    gamma = posteriors.gamma
    flags: list[str] = []

    if config.fix_gaussians:
        mu, sigma = prev.mu.copy(), prev.sigma.copy()
    else:
        d = features.shape[1]
        mu = np.empty((2, d))
        sigma = np.empty((2, d, d))
        for c, w in ((0, 1.0 - gamma), (1, gamma)):
            total = float(w.sum())
            if total < 1e-12:
                mu[c] = prev.mu[c]
                sigma[c] = prev.sigma[c]
                flags.append(f"class {c} weight ~ 0; Gaussian held")
                continue
            mu[c] = (w @ features) / total
            diff = features - mu[c]
            sigma[c] = (diff.T * w) @ diff / total + prev.reg_epsilon * np.eye(d)

    src = tree.sources
    pi = float(np.clip(gamma[src].mean(), config.pi_floor, config.pi_ceiling))

    nonsrc = np.flatnonzero(np.diff(tree.parent_ptr) > 0)
    if nonsrc.size:
        t11 = posteriors.factor_stats[nonsrc, 1, 1].sum()
        den = t11 + posteriors.factor_stats[nonsrc, 0, 1].sum()
    else:
        t11, den = 0.0, 0.0
    if den < 1e-12:
        rho = prev.rho
        flags.append("parent-AND mass ~ 0; rho held")
    else:
        rho = float(np.clip(t11 / den, config.rho_floor, config.rho_ceiling))

    params = ModelParams(
        pi=pi, rho=rho, mu=mu, sigma=sigma, reg_epsilon=prev.reg_epsilon
    )
    return params, flags


def em_fit(
    tree: FlowTree,
    features: np.ndarray,
    init: ModelParams,
    config: EmConfig | None = None,
) -> tuple[ModelParams, EmTrace]:
    """Unsupervised EM on one scene, starting from supervised parameters.

    Stops when the relative log-likelihood gain drops below config.tol or
    after config.max_iters iterations. A log-likelihood decrease beyond
    floating-point slack is reported as a NumericalError: exact E and M steps
    cannot lower it.
    """
    config = config or EmConfig()
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != tree.node_count:
        raise UsageError(
            f"features hold {features.shape[0]} rows, tree has {tree.node_count} nodes"
        )
    params = init
    trace = EmTrace()
    prev_ll: float | None = None
    for it in range(config.max_iters):
        evidence = Evidence(log_density=local_log_density(params, features))
        post = sum_product(tree, evidence, params)
        ll = post.loglik
        trace.logliks.append(ll)
        trace.iterations = it + 1
        if prev_ll is not None:
            slack = 1e-8 + 1e-12 * abs(prev_ll)
            if ll < prev_ll - slack:
                raise NumericalError(
                    f"log-likelihood decreased at iteration {it + 1}: "
                    f"{prev_ll} -> {ll}"
                )
            gain = (ll - prev_ll) / max(1.0, abs(prev_ll))
            if gain < config.tol:
                trace.converged = True
                trace.d_rho.append(0.0)
                trace.d_pi.append(0.0)
                break
        prev_ll = ll
        new_params, flags = m_step(tree, features, post, params, config)
        trace.flags.extend(flags)
        trace.d_rho.append(new_params.rho - params.rho)
        trace.d_pi.append(new_params.pi - params.pi)
        params = new_params
    return params, trace
