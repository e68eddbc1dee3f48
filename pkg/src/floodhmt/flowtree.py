"""Flow-dependency tree construction from a DEM.

Rising water floods terrain bottom-up: a pixel can only be flooded once the
ground connecting it to lower terrain is under water. The partial order
capturing this is built by visiting valid pixels in ascending (elevation,
row-major index) order while merging touched regions union-find style. When
pixel p is visited, the most recently visited (highest) node of each distinct
already-visited neighbouring region becomes a parent of p, then the regions
merge with p on top. Consequences relied on elsewhere:

- nodes are numbered in visit order, so every parent id < child id and the
  identity permutation is a valid topological order;
- each node has at most one child (it stops being a region's top the moment
  something attaches), so branching happens only through multi-parent merges
  at saddles;
- the undirected parent graph is a forest with
  edges = nodes - (connected components of valid pixels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataError, UsageError
from .raster import Grid, format_number

OFFSETS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
OFFSETS_8 = OFFSETS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass
class FlowTree:
    """Flow-dependency forest over the valid pixels of one DEM."""

    nrows: int
    ncols: int
    connectivity: int
    node_row: np.ndarray  # (N,) int64, grid row of node i
    node_col: np.ndarray  # (N,) int64
    elevation: np.ndarray  # (N,) float64, non-decreasing in node id
    parent_ptr: np.ndarray  # (N+1,) int64 CSR offsets
    parent_idx: np.ndarray  # parents of node i, each sorted ascending
    child: np.ndarray  # (N,) int64, -1 at chain tops
    node_of_pixel: np.ndarray  # (nrows, ncols) int64, -1 off the tree

    @property
    def node_count(self) -> int:
        return int(self.child.shape[0])

    @property
    def topo_order(self) -> np.ndarray:
        """Node ids in a parents-before-children order (the visit order)."""
        return np.arange(self.node_count, dtype=np.int64)

    @property
    def sources(self) -> np.ndarray:
        """Nodes with no parents (basin minima)."""
        return np.flatnonzero(np.diff(self.parent_ptr) == 0)

    def parents_of(self, node: int) -> list[int]:
        return self.parent_idx[self.parent_ptr[node] : self.parent_ptr[node + 1]].tolist()

    def children_of(self, node: int) -> list[int]:
        c = int(self.child[node])
        return [] if c < 0 else [c]

    @property
    def pixel_of_node(self) -> np.ndarray:
        """(N, 2) array of (row, col) per node."""
        return np.stack([self.node_row, self.node_col], axis=1)


def build_flow_tree(dem: Grid, connectivity: int = 4) -> FlowTree:
    """Build the flow-dependency forest over the DEM's valid pixels.

    Ties in elevation are broken by row-major pixel index; nodata pixels are
    excluded entirely.
    """
    if connectivity not in (4, 8):
        raise UsageError(f"connectivity must be 4 or 8, got {connectivity}")
    valid = dem.valid_mask()
    if not valid.any():
        raise DataError("DEM has no valid pixels")
    nrows, ncols = dem.nrows, dem.ncols
    flat = np.flatnonzero(valid.ravel())
    elev = dem.values.ravel()[flat]
    order = flat[np.argsort(elev, kind="stable")]
    n = order.shape[0]
    node_of = np.full(nrows * ncols, -1, dtype=np.int64)
    node_of[order] = np.arange(n, dtype=np.int64)

    offs = OFFSETS_4 if connectivity == 4 else OFFSETS_8
    drs = np.array([o[0] for o in offs], dtype=np.int64)
    dcs = np.array([o[1] for o in offs], dtype=np.int64)
    parent_ptr, parent_idx, child = _kernels.merge_tree_kernel(
        order, node_of, nrows, ncols, drs, dcs
    )
    return FlowTree(
        nrows=nrows,
        ncols=ncols,
        connectivity=connectivity,
        node_row=order // ncols,
        node_col=order % ncols,
        elevation=dem.values.ravel()[order],
        parent_ptr=parent_ptr,
        parent_idx=parent_idx,
        child=child,
        node_of_pixel=node_of.reshape(nrows, ncols),
    )


def ancestors(tree: FlowTree, node: int) -> set[int]:
    """All nodes reachable through parent links (the node's full lower set)."""
    if not (0 <= node < tree.node_count):
        raise UsageError(f"node {node} out of range")
    seen: set[int] = set()
    stack = list(tree.parents_of(node))
    while stack:
        k = stack.pop()
        if k in seen:
            continue
        seen.add(k)
        stack.extend(tree.parent_idx[tree.parent_ptr[k] : tree.parent_ptr[k + 1]])
    return seen


def validate_partial_order(tree: FlowTree, labels: np.ndarray) -> int:
    """Count flood nodes with at least one dry parent (0 for a legal map)."""
    labels = np.ascontiguousarray(labels, dtype=np.int8)
    if labels.shape != (tree.node_count,):
        raise UsageError(
            f"labels must be one value per node, got shape {labels.shape}"
        )
    return int(_kernels.count_order_violations(tree.parent_ptr, tree.parent_idx, labels))


def dump_tree(tree: FlowTree) -> str:
    """One line per node: node_id row col elevation parent_ids (or -)."""
    lines = []
    for i in range(tree.node_count):
        parents = tree.parents_of(i)
        ptxt = ",".join(str(p) for p in parents) if parents else "-"
        lines.append(
            f"{i} {tree.node_row[i]} {tree.node_col[i]} "
            f"{format_number(tree.elevation[i])} {ptxt}"
        )
    return "\n".join(lines) + "\n"
