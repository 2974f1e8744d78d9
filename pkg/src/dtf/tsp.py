"""Tree-structured permutations.

A TSP is a binary decision tree whose nodes each carry an independent
permutation. Evaluation permutes the input at every node on the way down and
routes on the permuted value of the split feature, so split values live in
post-permutation coordinates.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import (
    CategoricalDataset,
    IndependentPermutation,
    NodeDomain,
    all_configurations,
    configuration_index,
    configuration_space_size,
    count_matrix,
    invert,
)

__all__ = [
    "TspNode",
    "Tsp",
    "InvertibilityReport",
    "forward",
    "inverse",
    "route",
    "check_invertibility",
    "check_bijection_exhaustive",
    "node_counts",
    "EXHAUSTIVE_LIMIT",
]

EXHAUSTIVE_LIMIT = 10**6


@dataclass(eq=False)
class TspNode:
    """One node of a TSP.

    ``local_perm``, ``local_counts_init`` and ``local_counts`` are scratch
    state of the two-pass learner and are not part of the fitted map.
    """

    perm: IndependentPermutation
    split_feature: int | None = None
    left_values: frozenset | None = None
    left: "TspNode | None" = None
    right: "TspNode | None" = None
    node_id: int = -1
    depth: int = 0
    domain: NodeDomain | None = None
    local_perm: IndependentPermutation | None = None
    local_counts_init: np.ndarray | None = None
    local_counts: np.ndarray | None = None
    node_counts: np.ndarray | None = None
    _inv: IndependentPermutation | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.left is None) != (self.right is None):
            raise ValueError("a node needs either two children or none")
        if (self.split_feature is None) != (self.left is None):
            raise ValueError("split_feature must be set exactly on internal nodes")
        if self.left_values is not None:
            self.left_values = frozenset(int(a) for a in self.left_values)
            if not self.left_values:
                raise ValueError("left_values must be nonempty")

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def inverse_perm(self) -> IndependentPermutation:
        if self._inv is None or self._inv.cardinalities != self.perm.cardinalities:
            self._inv = invert(self.perm)
        return self._inv

    def children(self) -> tuple["TspNode", ...]:
        return () if self.is_leaf else (self.left, self.right)

    def set_perm(self, perm: IndependentPermutation) -> None:
        self.perm = perm
        self._inv = None

    def left_array(self) -> np.ndarray:
        return np.array(sorted(self.left_values), dtype=np.int64)


def _walk_bfs(root: TspNode) -> Iterator[TspNode]:
    queue = deque([root])
    while queue:
        node = queue.popleft()
        yield node
        queue.extend(node.children())


def _image_mask(mask: np.ndarray, perm: IndependentPermutation) -> np.ndarray:
    out = np.zeros_like(mask)
    np.put_along_axis(out, perm.maps, mask, axis=1)
    return out


def _split_masks(mask: np.ndarray, s: int, left_values) -> tuple[np.ndarray, np.ndarray]:
    v = np.zeros(mask.shape[1], dtype=bool)
    v[list(left_values)] = True
    left, right = mask.copy(), mask.copy()
    left[s] &= v
    right[s] &= ~v
    return left, right


class Tsp:
    """A tree-structured permutation over configurations with given cardinalities.

    Construction numbers nodes breadth-first, sets depths and derives every
    node domain from the root down: a child's domain is the parent's domain
    pushed through the parent permutation and restricted by the split.
    """

    def __init__(
        self,
        root: TspNode,
        cardinalities: Sequence[int],
        max_depth: int | None = None,
        structure: "Tsp | None" = None,
    ):
        self.root = root
        self.cardinalities = tuple(int(k) for k in cardinalities)
        self.k_max = max(self.cardinalities)
        for i, node in enumerate(_walk_bfs(root)):
            node.node_id = i
            if node.perm.cardinalities != self.cardinalities:
                raise ValueError(f"node {i} permutation has wrong cardinalities")
            if not node.is_leaf:
                if not 0 <= node.split_feature < self.d:
                    raise ValueError(f"node {i} split feature out of range")
                node.left.depth = node.depth + 1
                node.right.depth = node.depth + 1
        self._assign_domains()
        depth = max(n.depth for n in self.nodes())
        self.max_depth = depth if max_depth is None else int(max_depth)
        # the all-identity tree the learner started from, when known
        self.structure = structure

    @property
    def d(self) -> int:
        return len(self.cardinalities)

    def _assign_domains(self) -> None:
        self.root.domain = NodeDomain.full(self.cardinalities)
        for node in _walk_bfs(self.root):
            if node.is_leaf:
                continue
            reach = _image_mask(node.domain.mask, node.perm)
            lmask, rmask = _split_masks(reach, node.split_feature, node.left_values)
            if not lmask.any(axis=1).all() or not rmask.any(axis=1).all():
                raise ValueError(
                    f"node {node.node_id}: split {node.split_feature} in "
                    f"{sorted(node.left_values)} leaves a child with an empty domain"
                )
            node.left.domain = NodeDomain(lmask)
            node.right.domain = NodeDomain(rmask)

    def nodes(self) -> list[TspNode]:
        return list(_walk_bfs(self.root))

    def leaves(self) -> list[TspNode]:
        return [n for n in _walk_bfs(self.root) if n.is_leaf]

    def node(self, node_id: int) -> TspNode:
        for n in _walk_bfs(self.root):
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def depth(self) -> int:
        return max(n.depth for n in self.nodes())

    def forward(self, x):
        return forward(self, x)

    def inverse(self, z):
        return inverse(self, z)

    def __call__(self, x):
        return forward(self, x)[0]

    def num_parameters(self) -> int:
        """Moved permutation entries plus two per node (split feature and value)."""
        return sum(n.perm.moved_entries() + 2 for n in self.nodes())

    def __repr__(self):
        return (
            f"Tsp(d={self.d}, cardinalities={self.cardinalities}, "
            f"nodes={len(self.nodes())}, depth={self.depth()})"
        )


def _as_batch(t: Tsp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.int64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != t.d:
        raise ValueError(f"configurations have {x.shape[1]} features, expected {t.d}")
    if x.size and (x.min() < 0 or np.any(x.max(axis=0) >= np.array(t.cardinalities))):
        raise ValueError("configuration outside the cardinalities")
    return x, single


def forward(t: Tsp, x):
    """Evaluate the TSP.

    Returns ``(z, leaf_id)`` for a single configuration, or arrays
    ``(Z, leaf_ids)`` for a batch of shape ``(n, d)``.
    """
    X, single = _as_batch(t, x)
    Z = np.empty_like(X)
    leaf = np.empty(X.shape[0], dtype=np.int64)

    def visit(node: TspNode, rows: np.ndarray, vals: np.ndarray):
        vals = node.perm(vals)
        if node.is_leaf:
            Z[rows] = vals
            leaf[rows] = node.node_id
            return
        go_left = np.isin(vals[:, node.split_feature], node.left_array())
        visit(node.left, rows[go_left], vals[go_left])
        visit(node.right, rows[~go_left], vals[~go_left])

    visit(t.root, np.arange(X.shape[0]), X)
    if single:
        return Z[0], int(leaf[0])
    return Z, leaf


def route(t: Tsp, z) -> np.ndarray:
    """Leaf reached by routing on raw values, without applying any permutation.

    For an invertible TSP this recovers the forward path of the preimage of
    ``z``.
    """
    Z, single = _as_batch(t, z)
    leaf = np.empty(Z.shape[0], dtype=np.int64)

    def visit(node, rows):
        if node.is_leaf:
            leaf[rows] = node.node_id
            return
        go_left = np.isin(Z[rows, node.split_feature], node.left_array())
        visit(node.left, rows[go_left])
        visit(node.right, rows[~go_left])

    visit(t.root, np.arange(Z.shape[0]))
    return int(leaf[0]) if single else leaf


def inverse(t: Tsp, z):
    """Invert the TSP.

    The path is found by routing on ``z`` itself; inverse node permutations
    are then applied from the leaf back to the root. Only meaningful for a
    TSP that passes :func:`check_invertibility`.
    """
    Z, single = _as_batch(t, z)

    def visit(node: TspNode, vals: np.ndarray) -> np.ndarray:
        if not node.is_leaf:
            go_left = np.isin(vals[:, node.split_feature], node.left_array())
            out = np.empty_like(vals)
            out[go_left] = visit(node.left, vals[go_left])
            out[~go_left] = visit(node.right, vals[~go_left])
            vals = out
        return node.inverse_perm(vals)

    X = visit(t.root, Z)
    return X[0] if single else X


@dataclass
class InvertibilityReport:
    """Per-node audit of the domain-preservation constraint."""

    ok: bool
    # (node_id, feature) pairs whose permutation does not map D_j(N) onto itself
    violations: list[tuple[int, int]]
    messages: list[str]

    def __bool__(self) -> bool:
        return self.ok


def check_invertibility(t: Tsp) -> InvertibilityReport:
    """Check that every node permutation maps its node domain onto itself.

    Domains are recomputed from the tree rather than taken from the nodes, so
    a tree whose permutations were edited after construction is audited
    correctly.
    """
    violations: list[tuple[int, int]] = []
    messages: list[str] = []
    stack = [(t.root, NodeDomain.full(t.cardinalities).mask)]
    while stack:
        node, mask = stack.pop()
        reach = _image_mask(mask, node.perm)
        for j in np.flatnonzero((reach != mask).any(axis=1)):
            violations.append((node.node_id, int(j)))
            messages.append(
                f"node {node.node_id}: feature {j} maps "
                f"{np.flatnonzero(mask[j]).tolist()} onto "
                f"{np.flatnonzero(reach[j]).tolist()}"
            )
        if node.is_leaf:
            continue
        s = node.split_feature
        dom_s = set(np.flatnonzero(reach[s]).tolist())
        if not node.left_values < dom_s:
            messages.append(
                f"node {node.node_id}: left values {sorted(node.left_values)} "
                f"are not a proper subset of the split domain {sorted(dom_s)}"
            )
            violations.append((node.node_id, s))
            continue
        lmask, rmask = _split_masks(reach, s, node.left_values)
        stack.append((node.right, rmask))
        stack.append((node.left, lmask))
    violations.sort()
    return InvertibilityReport(not violations, violations, messages)


def check_bijection_exhaustive(t: Tsp, limit: int = EXHAUSTIVE_LIMIT) -> bool:
    """True iff the forward map permutes the whole configuration space."""
    size = configuration_space_size(t.cardinalities)
    if size > limit:
        raise ValueError(
            f"configuration space of size {size} exceeds the exhaustive limit {limit}"
        )
    Z, _ = forward(t, all_configurations(t.cardinalities, limit))
    idx = configuration_index(Z, t.cardinalities)
    return bool(np.unique(idx).size == size)


def node_counts(t: Tsp, data: CategoricalDataset | np.ndarray) -> dict[int, np.ndarray]:
    """Counts of transformed points that fall in each node's domain."""
    values = data.values if isinstance(data, CategoricalDataset) else np.asarray(data)
    Z, _ = forward(t, values)
    out = {}
    for node in t.nodes():
        inside = node.domain.contains(Z) if len(Z) else np.zeros(0, dtype=bool)
        out[node.node_id] = count_matrix(Z[inside], t.cardinalities)
    return out
