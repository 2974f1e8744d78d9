"""Learning a TSP: greedy structure search, then optimal node permutations.

Fitting has three steps. ``construct_tree`` grows an all-identity decision
tree and records raw per-leaf counts. ``learn_local_permutations`` walks the
tree bottom-up, sorting each node's counts ascending on its domain.
``construct_equivalent_tree`` walks top-down and conjugates those local sorts
by the accumulated ancestor permutation, which gives a valid TSP that routes
every input exactly as the identity tree does.
"""

from __future__ import annotations

from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from typing import Sequence

import numpy as np

from .core import (
    CategoricalDataset,
    IndependentPermutation,
    NodeDomain,
    count_matrix,
    empirical_nll,
    invert,
    permute_counts,
)
from .tsp import Tsp, TspNode, forward, node_counts

__all__ = [
    "CRITERIA",
    "FitConfig",
    "SplitCandidate",
    "make_rng",
    "min_perm_nll",
    "glp_scores",
    "find_best_split",
    "construct_tree",
    "sort_permutation",
    "learn_local_permutations",
    "construct_equivalent_tree",
    "fit_tsp",
    "rank_consistent",
    "check_rank_consistency",
]

CRITERIA = ("glp", "random")


def make_rng(seed: int) -> np.random.Generator:
    """Seeded Philox generator; every random choice in the package goes through one."""
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


@dataclass(frozen=True)
class FitConfig:
    max_depth: int = 2
    min_samples_split: int = 2
    criterion: str = "glp"
    seed: int = 0
    num_tsps: int = 1

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.num_tsps < 0:
            raise ValueError("num_tsps must be >= 0")


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    left_values: frozenset
    # higher is better; for GLP this is minus the MinPermNLL in nats
    score: float


def min_perm_nll(left_counts: np.ndarray, right_counts: np.ndarray, split_feature: int) -> float:
    """Total NLL after the best independent relabeling of the right child.

    Off the split feature, both sides are sorted and added rank to rank,
    which is the optimal way to align the right counts with the left. The
    split feature keeps its raw counts. Zeros outside the node domain sort
    to the front, so padded full rows give the same result as domain rows.
    """
    left = np.sort(np.asarray(left_counts), axis=1)
    right = np.sort(np.asarray(right_counts), axis=1)
    merged = left + right
    merged[split_feature] = np.asarray(left_counts)[split_feature] + np.asarray(
        right_counts
    )[split_feature]
    return float(empirical_nll(merged).sum())


def glp_scores(values: np.ndarray, domain: NodeDomain) -> np.ndarray:
    """MinPermNLL for every singleton split ``(s, {a})`` at once.

    Returns a ``(d, k_max)`` array with ``+inf`` where the candidate is not
    valid (``a`` outside the domain or a feature with a single value).
    """
    mask = domain.mask
    d, kmax = mask.shape
    m = values.shape[0]
    onehot = np.zeros((m, d * kmax), dtype=np.float64)
    if m:
        onehot[np.arange(m)[:, None], values + (np.arange(d) * kmax)[None, :]] = 1.0
    joint = (onehot.T @ onehot).reshape(d, kmax, d, kmax)
    totals = onehot.sum(axis=0).reshape(d, kmax)
    left = np.sort(joint, axis=3)
    right = np.sort(totals[None, None, :, :] - joint, axis=3)
    merged = left + right
    nll = empirical_nll(merged)
    own = empirical_nll(totals)
    idx = np.arange(d)
    nll[idx, :, idx] = own[:, None]
    out = nll.sum(axis=2)
    valid = mask & (mask.sum(axis=1) >= 2)[:, None]
    return np.where(valid, out, np.inf)


def find_best_split(
    node_values: np.ndarray,
    domain: NodeDomain,
    criterion: str,
    rng: np.random.Generator | None = None,
) -> SplitCandidate | None:
    """Best split of the data at a node, or ``None`` when nothing can be split.

    GLP ties go to the lowest feature, then the lowest value.
    """
    splittable = np.flatnonzero(domain.sizes() >= 2)
    if splittable.size == 0:
        return None
    if criterion == "glp":
        scores = -glp_scores(np.asarray(node_values, dtype=np.int64), domain)
        flat = int(np.argmax(scores))
        s, a = divmod(flat, scores.shape[1])
        return SplitCandidate(s, frozenset([a]), float(scores[s, a]))
    if criterion == "random":
        if rng is None:
            raise ValueError("the random criterion needs a generator")
        s = int(splittable[rng.integers(splittable.size)])
        dom = domain.values(s)
        a = int(dom[rng.integers(dom.size)])
        return SplitCandidate(s, frozenset([a]), 0.0)
    raise ValueError(f"unknown criterion {criterion!r}")


def construct_tree(
    data: CategoricalDataset, cfg: FitConfig, rng: np.random.Generator | None = None
) -> Tsp:
    """Grow an all-identity tree; leaves keep the raw counts of their data."""
    if data.n == 0:
        raise ValueError("cannot grow a tree on an empty dataset")
    if rng is None:
        rng = make_rng(cfg.seed)
    cards = data.cardinalities
    ident = IndependentPermutation.identity(cards)

    def grow(values: np.ndarray, domain: NodeDomain, depth: int) -> TspNode:
        split = None
        if values.shape[0] >= cfg.min_samples_split and depth < cfg.max_depth:
            split = find_best_split(values, domain, cfg.criterion, rng)
        if split is None:
            return TspNode(
                perm=ident, domain=domain, local_counts_init=count_matrix(values, cards)
            )
        s, v = split.feature, split.left_values
        go_left = np.isin(values[:, s], sorted(v))
        ldom, rdom = domain.split(s, v)
        left = grow(values[go_left], ldom, depth + 1)
        right = grow(values[~go_left], rdom, depth + 1)
        return TspNode(perm=ident, split_feature=s, left_values=v, left=left, right=right)

    root = grow(data.values, NodeDomain.full(cards), 0)
    return Tsp(root, cards, max_depth=cfg.max_depth)


def sort_permutation(
    counts: np.ndarray, domain: NodeDomain, cardinalities: Sequence[int]
) -> IndependentPermutation:
    """Permutation that sorts each row ascending on the domain (stable).

    Categories outside the domain are fixed.
    """
    d, kmax = counts.shape
    maps = np.tile(np.arange(kmax), (d, 1))
    for j in range(d):
        dom = domain.values(j)
        order = np.argsort(counts[j, dom], kind="stable")
        maps[j, dom[order]] = dom
    return IndependentPermutation(maps, tuple(cardinalities))


def learn_local_permutations(t: Tsp) -> Tsp:
    """Bottom-up pass filling ``local_counts_init``, ``local_perm`` and ``local_counts``.

    Works in place on an all-identity tree from :func:`construct_tree`.
    """

    def visit(node: TspNode):
        if not node.is_leaf:
            visit(node.left)
            visit(node.right)
            node.local_counts_init = node.left.local_counts + node.right.local_counts
        node.local_perm = sort_permutation(node.local_counts_init, node.domain, t.cardinalities)
        node.local_counts = permute_counts(node.local_perm, node.local_counts_init)

    visit(t.root)
    return t


def construct_equivalent_tree(
    t: Tsp, ancestor_perm: IndependentPermutation | None = None
) -> Tsp:
    """Top-down pass producing a valid TSP that routes like ``t``.

    ``t`` must have been through :func:`learn_local_permutations`. Each node
    permutation is the local sort conjugated by the ancestor permutation,
    and split values are carried through the ancestor permutation composed
    with the local sort. The input tree is left untouched and kept as the
    result's ``structure``.
    """
    cards = t.cardinalities
    if ancestor_perm is None:
        ancestor_perm = IndependentPermutation.identity(cards)

    def build(old: TspNode, anc: IndependentPermutation) -> TspNode:
        local = old.local_perm
        perm = anc @ local @ invert(anc)
        node = TspNode(
            perm=perm,
            local_perm=local,
            local_counts_init=old.local_counts_init,
            local_counts=old.local_counts,
        )
        if old.is_leaf:
            return node
        carry = anc @ local
        s = old.split_feature
        node.split_feature = s
        node.left_values = frozenset(int(carry.maps[s, a]) for a in old.left_values)
        node.left = build(old.left, carry)
        node.right = build(old.right, carry)
        return node

    root = build(t.root, ancestor_perm)
    return Tsp(root, cards, max_depth=t.max_depth, structure=t)


def fit_tsp(
    data: CategoricalDataset, cfg: FitConfig, rng: np.random.Generator | None = None
) -> tuple[Tsp, CategoricalDataset]:
    """Fit one TSP and return it with the forward-transformed data."""
    if rng is None:
        rng = make_rng(cfg.seed)
    structure = learn_local_permutations(construct_tree(data, cfg, rng))
    t = construct_equivalent_tree(structure)
    z, _ = forward(t, data.values)
    return t, data.with_values(z)


def rank_consistent(counts: Sequence[np.ndarray], domains: Sequence[NodeDomain]) -> bool:
    """Whether one global relabeling per feature sorts every count row ascending.

    Each node asks that a category with a strictly smaller count come before
    one with a larger count; ties ask nothing. A common order exists exactly
    when these requirements have no cycle.
    """
    if not counts:
        return True
    d, kmax = counts[0].shape
    for j in range(d):
        graph: dict[int, set[int]] = {a: set() for a in range(kmax)}
        for c, dom in zip(counts, domains):
            if np.any(c[j][~dom.mask[j]] != 0):
                return False
            vals = dom.values(j)
            row = c[j, vals]
            less = row[:, None] < row[None, :]
            for a_i, b_i in zip(*np.nonzero(less)):
                graph[int(vals[b_i])].add(int(vals[a_i]))
        try:
            tuple(TopologicalSorter(graph).static_order())
        except CycleError:
            return False
    return True


def check_rank_consistency(t: Tsp, data: CategoricalDataset) -> bool:
    counts = node_counts(t, data)
    nodes = t.nodes()
    return rank_consistent([counts[n.node_id] for n in nodes], [n.domain for n in nodes])
