"""Exhaustive reference computations and expressivity constructions.

Everything here is exact and guarded: inputs that would make an enumeration
too large raise instead of being truncated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CategoricalDataset,
    IndependentPermutation,
    all_configurations,
    configuration_index,
    configuration_space_size,
    empirical_nll,
)
from .tsp import Tsp, TspNode, check_bijection_exhaustive, forward

__all__ = [
    "ConfigSpace",
    "ORACLE_LIMIT",
    "assignment_count",
    "brute_force_optimal_nll",
    "brute_force_direct_nll",
    "single_feature_swap_tsp",
    "snake_path",
    "realize_arbitrary_permutation",
    "compose_forward",
]

ORACLE_LIMIT = 10**5
EXPRESSIVITY_LIMIT = 16


@dataclass(frozen=True)
class ConfigSpace:
    """All configurations for given cardinalities, in lexicographic order."""

    cardinalities: tuple[int, ...]
    limit: int = 10**6

    @property
    def size(self) -> int:
        return configuration_space_size(self.cardinalities)

    def configurations(self) -> np.ndarray:
        return all_configurations(self.cardinalities, self.limit)

    def index(self, x) -> np.ndarray:
        return configuration_index(x, self.cardinalities)


def _structure_of(t: Tsp) -> Tsp:
    s = t.structure if t.structure is not None else t
    if not all(n.perm.is_identity() for n in s.nodes()):
        raise ValueError("expected a tree whose node permutations are all identity")
    return s


def assignment_count(t: Tsp) -> int:
    """Number of domain-respecting permutation assignments over all nodes."""
    total = 1
    for node in _structure_of(t).nodes():
        for size in node.domain.sizes():
            total *= math.factorial(int(size))
    return total


def _domain_perms(dom: np.ndarray, kmax: int) -> list[np.ndarray]:
    maps = []
    for image in itertools.permutations(dom.tolist()):
        m = np.arange(kmax)
        m[dom] = image
        maps.append(m)
    return maps


def brute_force_optimal_nll(t: Tsp, data: CategoricalDataset, limit: int = ORACLE_LIMIT) -> float:
    """Smallest mean train NLL over every TSP tree-equivalent to ``t``'s structure.

    A tree-equivalent TSP is described by one domain-respecting permutation
    per node; a point reaching leaf L is mapped through the leaf's
    permutation first and then through each ancestor's up to the root. The
    NLL is a sum over features and feature j only sees the j-th rows, so
    each feature is minimized on its own.
    """
    structure = _structure_of(t)
    total = assignment_count(structure)
    if total > limit:
        raise ValueError(f"{total} permutation assignments exceed the oracle limit {limit}")
    n = data.n
    if n == 0:
        raise ValueError("empty dataset")
    kmax = structure.k_max
    _, leaf_of = forward(structure, data.values)
    leaves = structure.leaves()
    # each leaf's root-to-leaf path, as positions in ``nodes``
    nodes = structure.nodes()
    pos = {nd.node_id: i for i, nd in enumerate(nodes)}
    parent = {}
    for nd in nodes:
        for c in nd.children():
            parent[c.node_id] = nd.node_id
    paths = []
    for leaf in leaves:
        path, cur = [], leaf.node_id
        while True:
            path.append(pos[cur])
            if cur not in parent:
                break
            cur = parent[cur]
        paths.append(path)  # leaf first, root last

    best = 0.0
    for j in range(structure.d):
        leaf_counts = np.stack(
            [
                np.bincount(data.values[leaf_of == leaf.node_id, j], minlength=kmax)
                for leaf in leaves
            ]
        )
        choices = [_domain_perms(nd.domain.values(j), kmax) for nd in nodes]
        feature_best = math.inf
        for combo in itertools.product(*choices):
            merged = np.zeros(kmax, dtype=np.int64)
            for counts, path in zip(leaf_counts, paths):
                m = np.arange(kmax)
                for p in path:
                    m = combo[p][m]
                np.add.at(merged, m, counts)
            feature_best = min(feature_best, float(empirical_nll(merged)))
        best += feature_best
    return best / n


def brute_force_direct_nll(t: Tsp, data: CategoricalDataset, limit: int = ORACLE_LIMIT) -> float:
    """Same minimum, by blind search over whole TSPs with the given shape.

    Tries every independent permutation at every node and every singleton
    split value, keeps the candidates that are bijections and send every
    configuration to the same leaf as the structure does, and returns the
    best mean train NLL among them. Only usable for very small trees.
    """
    structure = _structure_of(t)
    cards = structure.cardinalities
    nodes = structure.nodes()
    internal = [nd for nd in nodes if not nd.is_leaf]
    all_perms = [
        IndependentPermutation.from_rows([list(r) for r in rows])
        for rows in itertools.product(*[itertools.permutations(range(k)) for k in cards])
    ]
    split_choices = [range(cards[nd.split_feature]) for nd in internal]
    total = len(all_perms) ** len(nodes) * math.prod(len(c) for c in split_choices)
    if total > limit:
        raise ValueError(f"{total} candidate trees exceed the oracle limit {limit}")
    if any(len(nd.left_values) != 1 for nd in internal):
        raise ValueError("direct search supports singleton splits only")
    configs = all_configurations(cards)
    _, want = forward(structure, configs)
    best = math.inf
    for perms in itertools.product(all_perms, repeat=len(nodes)):
        for values in itertools.product(*split_choices):
            cand = _rebuild(structure.root, iter(perms), dict(zip(
                [nd.node_id for nd in internal], values)))
            try:
                tree = Tsp(cand, cards)
            except ValueError:
                continue
            _, got = forward(tree, configs)
            if not np.array_equal(got, want) or not check_bijection_exhaustive(tree):
                continue
            z, _ = forward(tree, data.values)
            nll = float(empirical_nll(np.stack([
                np.bincount(z[:, j], minlength=structure.k_max) for j in range(len(cards))
            ])).sum())
            best = min(best, nll)
    return best / data.n


def _rebuild(old: TspNode, perms, values: dict[int, int]) -> TspNode:
    # perms is consumed in breadth-first order to match node ids
    order = []
    queue = [old]
    while queue:
        nd = queue.pop(0)
        order.append(nd)
        queue.extend(nd.children())
    assigned = {nd.node_id: next(perms) for nd in order}

    def build(nd: TspNode) -> TspNode:
        if nd.is_leaf:
            return TspNode(perm=assigned[nd.node_id])
        return TspNode(
            perm=assigned[nd.node_id],
            split_feature=nd.split_feature,
            left_values=frozenset([values[nd.node_id]]),
            left=build(nd.left),
            right=build(nd.right),
        )

    return build(old)


def single_feature_swap_tsp(a: Sequence[int], b: Sequence[int], cardinalities: Sequence[int]) -> Tsp:
    """TSP that exchanges configurations ``a`` and ``b`` and fixes all others.

    ``a`` and ``b`` must differ in exactly one feature f. The left spine pins
    every other feature to its value in ``a``. When f has more than two
    categories, one more split sends every value of f except the two being
    swapped to the left, and the swap sits in the right leaf; with two
    categories the swap sits at the end of the spine.
    """
    cards = tuple(int(k) for k in cardinalities)
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    d = len(cards)
    if len(a) != d or len(b) != d:
        raise ValueError("configurations must have one value per feature")
    for x in (a, b):
        if any(not 0 <= v < k for v, k in zip(x, cards)):
            raise ValueError("configuration outside the cardinalities")
    diff = [j for j in range(d) if a[j] != b[j]]
    if len(diff) != 1:
        raise ValueError(f"a and b must differ in exactly one feature, they differ in {len(diff)}")
    f = diff[0]
    ident = IndependentPermutation.identity(cards)
    maps = np.array(ident.maps)
    maps[f, a[f]], maps[f, b[f]] = b[f], a[f]
    swap = IndependentPermutation(maps, cards)

    if cards[f] > 2:
        rest = frozenset(range(cards[f])) - {a[f], b[f]}
        node = TspNode(
            perm=ident,
            split_feature=f,
            left_values=rest,
            left=TspNode(perm=ident),
            right=TspNode(perm=swap),
        )
    else:
        node = TspNode(perm=swap)
    for j in reversed([j for j in range(d) if j != f]):
        node = TspNode(
            perm=ident,
            split_feature=j,
            left_values=frozenset([a[j]]),
            left=node,
            right=TspNode(perm=ident),
        )
    return Tsp(node, cards, max_depth=d)


def snake_path(cardinalities: Sequence[int], limit: int = 10**6) -> list[tuple[int, ...]]:
    """Every configuration once, consecutive ones differing in a single feature.

    Fix the first feature, walk the rest recursively, and reverse that walk
    for every other value of the first feature.
    """
    cards = tuple(int(k) for k in cardinalities)
    size = configuration_space_size(cards)
    if size > limit:
        raise ValueError(f"configuration space has {size} elements, above the limit {limit}")
    if len(cards) == 1:
        return [(a,) for a in range(cards[0])]
    rest = snake_path(cards[1:], limit)
    path = []
    for a in range(cards[0]):
        block = rest if a % 2 == 0 else rest[::-1]
        path.extend((a,) + tail for tail in block)
    return path


def realize_arbitrary_permutation(
    target: Sequence[int], cardinalities: Sequence[int]
) -> list[Tsp]:
    """Swap TSPs whose composition equals ``target``.

    ``target[i]`` is the lexicographic index of the image of configuration
    ``i``. The TSPs are meant to be applied in list order. The permutation
    is bubble-sorted along the snake path, one swap TSP per adjacent
    exchange.
    """
    cards = tuple(int(k) for k in cardinalities)
    size = configuration_space_size(cards)
    if size > EXPRESSIVITY_LIMIT:
        raise ValueError(f"{size} configurations exceed the limit {EXPRESSIVITY_LIMIT}")
    target = [int(t) for t in target]
    if sorted(target) != list(range(size)):
        raise ValueError("target is not a permutation of the configuration space")
    snake = snake_path(cards)
    snake_idx = [int(i) for i in configuration_index(np.array(snake), cards)]
    where = {c: p for p, c in enumerate(snake_idx)}
    # token starting at snake position p must end at this position
    dest = [where[target[snake_idx[p]]] for p in range(size)]
    arr = list(range(size))
    out = []
    changed = True
    while changed:
        changed = False
        for q in range(size - 1):
            if dest[arr[q]] > dest[arr[q + 1]]:
                arr[q], arr[q + 1] = arr[q + 1], arr[q]
                out.append(single_feature_swap_tsp(snake[q], snake[q + 1], cards))
                changed = True
    return out


def compose_forward(tsps: Sequence[Tsp], x: np.ndarray) -> np.ndarray:
    """Apply TSPs in order."""
    z = np.atleast_2d(np.asarray(x, dtype=np.int64))
    for t in tsps:
        z, _ = forward(t, z)
    return z
