"""Exact inference on the flow-dependency tree.

The hidden layer is one binary class per tree node; the coupling factor at a
non-source node n conditions its class on the AND of its parents' classes:
flooded parents keep the node flooded with probability rho, while any dry
parent forces the node dry. Parentless nodes carry the Bernoulli(pi) prior.
Evidence is the per-node Gaussian log density pair.

sum_product computes exact posterior marginals, the per-node joint
distribution of (class, parent-AND), and the total log-likelihood of the
evidence. max_sum computes the jointly most probable labelling (ties toward
dry). Both run two linear sweeps over the node order. The brute-force
counterparts enumerate all labellings and exist to check the sweeps on small
instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import DataError, UsageError
from .flowtree import FlowTree
from .model import ModelParams, local_log_density
from .raster import SceneBundle


@dataclass
class Evidence:
    """Per-node (dry, flood) log densities, aligned with tree node ids."""

    log_density: np.ndarray  # (N, 2) float64

    def __post_init__(self):
        self.log_density = np.ascontiguousarray(self.log_density, dtype=np.float64)
        if self.log_density.ndim != 2 or self.log_density.shape[1] != 2:
            raise DataError(
                f"evidence must have shape (N, 2), got {self.log_density.shape}"
            )
        if not np.isfinite(self.log_density).all():
            raise DataError("evidence log densities must be finite")

    @property
    def node_count(self) -> int:
        return self.log_density.shape[0]


@dataclass
class Posteriors:
    """Sum-product output.

    gamma[n] is the posterior flood probability of node n. factor_stats[n] is
    the 2x2 joint P(class=a, parent-AND=b) for non-source nodes, with the
    structurally impossible (flood, dry-AND) cell exactly zero; source rows
    are NaN. loglik is the log marginal likelihood of the evidence.
    """

    gamma: np.ndarray  # (N,)
    factor_stats: np.ndarray  # (N, 2, 2)
    loglik: float


def compute_evidence(scene: SceneBundle, tree: FlowTree, params: ModelParams) -> Evidence:
    """Gaussian log densities of each tree node's feature vector."""
    feats = scene.features(tree.node_row, tree.node_col)
    return Evidence(log_density=local_log_density(params, feats))


def _check_inputs(tree: FlowTree, evidence: Evidence) -> None:
    if evidence.node_count != tree.node_count:
        raise UsageError(
            f"evidence holds {evidence.node_count} nodes, tree has {tree.node_count}"
        )


def sum_product(tree: FlowTree, evidence: Evidence, params: ModelParams) -> Posteriors:
    """Exact posterior marginals and pairwise stats via two message sweeps."""
    _check_inputs(tree, evidence)
    ev = evidence.log_density
    gamma, t00, t01, t11, loglik = _kernels.sum_product_kernel(
        tree.parent_ptr,
        tree.parent_idx,
        tree.child,
        np.ascontiguousarray(ev[:, 0]),
        np.ascontiguousarray(ev[:, 1]),
        float(params.pi),
        float(params.rho),
    )
    stats = np.empty((tree.node_count, 2, 2))
    stats[:, 0, 0] = t00
    stats[:, 0, 1] = t01
    stats[:, 1, 0] = np.where(np.isnan(t00), np.nan, 0.0)
    stats[:, 1, 1] = t11
    return Posteriors(gamma=gamma, factor_stats=stats, loglik=float(loglik))


def max_sum(tree: FlowTree, evidence: Evidence, params: ModelParams) -> np.ndarray:
    """Jointly most probable labelling (int8 per node, ties toward dry)."""
    _check_inputs(tree, evidence)
    ev = evidence.log_density
    return _kernels.max_sum_kernel(
        tree.parent_ptr,
        tree.parent_idx,
        tree.child,
        np.ascontiguousarray(ev[:, 0]),
        np.ascontiguousarray(ev[:, 1]),
        float(params.pi),
        float(params.rho),
    )


def joint_log_prob(
    tree: FlowTree, evidence: Evidence, params: ModelParams, labels: np.ndarray
) -> float:
    """Log of the unnormalised joint weight of one complete labelling.

    Returns -inf for labellings that violate the partial order (a flooded
    node below a dry parent has zero transition probability).
    """
    _check_inputs(tree, evidence)
    labels = np.asarray(labels).astype(np.int64)
    ev = evidence.log_density
    total = float(ev[np.arange(tree.node_count), labels].sum())
    log_pi = np.log(params.pi)
    log_1mpi = np.log1p(-params.pi)
    log_rho = np.log(params.rho)
    log_1mrho = np.log1p(-params.rho)
    for i in range(tree.node_count):
        a, b = tree.parent_ptr[i], tree.parent_ptr[i + 1]
        if a == b:
            total += log_pi if labels[i] == 1 else log_1mpi
        else:
            parents_and = int(labels[tree.parent_idx[a:b]].min())
            if labels[i] == 1:
                if parents_and == 0:
                    return float("-inf")
                total += log_rho
            elif parents_and == 1:
                total += log_1mrho
            # dry child under a dry AND contributes log 1
    return total


def _enumerate_weights(
    tree: FlowTree, evidence: Evidence, params: ModelParams
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    n = tree.node_count
    if n > 20:
        raise UsageError(f"brute force caps at 20 nodes, got {n}")
    ev = evidence.log_density
    masks = np.arange(2**n, dtype=np.int64)
    y = ((masks[:, None] >> np.arange(n)) & 1).astype(np.float64)  # (2^n, n)
    logw = y @ ev[:, 1] + (1.0 - y) @ ev[:, 0]
    log_pi = np.log(params.pi)
    log_1mpi = np.log1p(-params.pi)
    log_rho = np.log(params.rho)
    log_1mrho = np.log1p(-params.rho)
    ands: list[np.ndarray] = [np.empty(0)] * n
    for i in range(n):
        a, b = tree.parent_ptr[i], tree.parent_ptr[i + 1]
        yi = y[:, i]
        if a == b:
            logw += np.where(yi == 1.0, log_pi, log_1mpi)
        else:
            pa = y[:, tree.parent_idx[a:b]].min(axis=1)
            ands[i] = pa
            logw += np.where(
                yi == 1.0,
                np.where(pa == 1.0, log_rho, -np.inf),
                np.where(pa == 1.0, log_1mrho, 0.0),
            )
    return logw, y, ands


def _masked_lse(logw: np.ndarray, mask: np.ndarray) -> float:
    sel = logw[mask]
    if sel.size == 0 or np.all(np.isneginf(sel)):
        return float("-inf")
    return float(logsumexp(sel))


def brute_force_posterior(
    tree: FlowTree, evidence: Evidence, params: ModelParams
) -> Posteriors:
    """Posteriors by enumerating every labelling (testing oracle, N <= 20)."""
    logw, y, ands = _enumerate_weights(tree, evidence, params)
    logz = float(logsumexp(logw))
    n = tree.node_count
    gamma = np.empty(n)
    stats = np.full((n, 2, 2), np.nan)
    for i in range(n):
        gamma[i] = np.exp(_masked_lse(logw, y[:, i] == 1.0) - logz)
        a, b = tree.parent_ptr[i], tree.parent_ptr[i + 1]
        if a == b:
            continue
        pa = ands[i]
        for cls in (0, 1):
            for pand in (0, 1):
                sel = (y[:, i] == cls) & (pa == pand)
                stats[i, cls, pand] = np.exp(_masked_lse(logw, sel) - logz)
    return Posteriors(gamma=gamma, factor_stats=stats, loglik=logz)


def brute_force_map(
    tree: FlowTree, evidence: Evidence, params: ModelParams
) -> tuple[np.ndarray, float]:
    """Exhaustive MAP labelling and its joint log weight (testing oracle).

    Ties keep the first maximum in ascending bitmask order (bit i = label of
    node i), which prefers dry at low node ids.
    """
    logw, y, _ = _enumerate_weights(tree, evidence, params)
    best = int(np.argmax(logw))
    return y[best].astype(np.int8), float(logw[best])
