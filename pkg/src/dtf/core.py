"""Value types for categorical data and independent permutations.

Everything here is immutable after construction. Count matrices are plain
``(d, k_max)`` integer arrays; entries at ``a >= k_j`` are structural zeros.
Permutations are stored as dense lookup tables padded to ``k_max`` with the
identity, so applying one to a batch is a single gather per column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CategoricalDataset",
    "IndependentPermutation",
    "NodeDomain",
    "apply_permutation",
    "compose",
    "invert",
    "permute_counts",
    "count_matrix",
    "empirical_nll",
    "marginal_entropies",
    "all_configurations",
    "configuration_index",
    "configuration_space_size",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _as_cards(cardinalities: Iterable[int]) -> tuple[int, ...]:
    cards = tuple(int(k) for k in cardinalities)
    if len(cards) == 0:
        raise ValueError("need at least one feature")
    if any(k < 1 for k in cards):
        raise ValueError(f"cardinalities must be >= 1, got {cards}")
    return cards


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """An ``n x d`` matrix of category indices with per-feature cardinalities."""

    values: np.ndarray
    cardinalities: tuple[int, ...]
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        cards = _as_cards(self.cardinalities)
        vals = np.asarray(self.values)
        if vals.ndim == 1 and vals.size == 0:
            vals = vals.reshape(0, len(cards))
        if vals.ndim != 2 or vals.shape[1] != len(cards):
            raise ValueError(
                f"values must have shape (n, {len(cards)}), got {vals.shape}"
            )
        if vals.size and not np.issubdtype(vals.dtype, np.integer):
            if not np.all(vals == np.round(vals)):
                raise ValueError("values must be integer category indices")
        vals = vals.astype(np.int64)
        if vals.size:
            if vals.min() < 0 or np.any(vals.max(axis=0) >= np.array(cards)):
                raise ValueError("category index out of range for its cardinality")
        names = self.column_names
        if names is not None:
            names = tuple(str(c) for c in names)
            if len(names) != len(cards):
                raise ValueError("column_names length does not match d")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def k_max(self) -> int:
        return max(self.cardinalities)

    def __len__(self) -> int:
        return self.n

    def with_values(self, values: np.ndarray) -> "CategoricalDataset":
        return CategoricalDataset(values, self.cardinalities, self.column_names)

    def subset(self, index) -> "CategoricalDataset":
        return self.with_values(self.values[index])

    def counts(self) -> np.ndarray:
        return count_matrix(self.values, self.cardinalities)


@dataclass(frozen=True, eq=False)
class IndependentPermutation:
    """A product of per-feature 1-D permutations.

    ``maps[j, a]`` is the image of category ``a`` of feature ``j``. Rows are
    padded to ``k_max`` with identity entries.
    """

    maps: np.ndarray
    cardinalities: tuple[int, ...] = field(default=())

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.int64)
        if maps.ndim != 2:
            raise ValueError("maps must be a 2-D array")
        cards = self.cardinalities or (maps.shape[1],) * maps.shape[0]
        cards = _as_cards(cards)
        if len(cards) != maps.shape[0] or max(cards) != maps.shape[1]:
            raise ValueError(
                f"maps shape {maps.shape} inconsistent with cardinalities {cards}"
            )
        for j, k in enumerate(cards):
            row = maps[j]
            if not np.array_equal(np.sort(row[:k]), np.arange(k)):
                raise ValueError(f"row {j} is not a bijection of {{0..{k - 1}}}")
            if not np.array_equal(row[k:], np.arange(k, maps.shape[1])):
                raise ValueError(f"row {j} padding beyond k_j must be identity")
        object.__setattr__(self, "maps", _frozen(maps))
        object.__setattr__(self, "cardinalities", cards)

    @classmethod
    def identity(cls, cardinalities: Sequence[int]) -> "IndependentPermutation":
        cards = _as_cards(cardinalities)
        maps = np.tile(np.arange(max(cards)), (len(cards), 1))
        return cls(maps, cards)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "IndependentPermutation":
        """Build from ragged rows, ``rows[j]`` of length ``k_j``."""
        cards = tuple(len(r) for r in rows)
        kmax = max(cards)
        maps = np.tile(np.arange(kmax), (len(cards), 1))
        for j, r in enumerate(rows):
            maps[j, : len(r)] = r
        return cls(maps, cards)

    def rows(self) -> list[list[int]]:
        return [self.maps[j, :k].tolist() for j, k in enumerate(self.cardinalities)]

    @property
    def d(self) -> int:
        return len(self.cardinalities)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_permutation(self, x)

    def __matmul__(self, other: "IndependentPermutation") -> "IndependentPermutation":
        return compose(self, other)

    def inverse(self) -> "IndependentPermutation":
        return invert(self)

    def is_identity(self) -> bool:
        return bool(np.all(self.maps == np.arange(self.maps.shape[1])[None, :]))

    def moved_entries(self) -> int:
        """Number of (feature, category) pairs not fixed by the permutation."""
        return int(np.count_nonzero(self.maps != np.arange(self.maps.shape[1])))

    def __eq__(self, other):
        if not isinstance(other, IndependentPermutation):
            return NotImplemented
        return self.cardinalities == other.cardinalities and np.array_equal(
            self.maps, other.maps
        )

    def __hash__(self):
        return hash((self.cardinalities, self.maps.tobytes()))

    def __repr__(self):
        return f"IndependentPermutation({self.rows()})"


def _check_same(p: IndependentPermutation, q: IndependentPermutation):
    if p.cardinalities != q.cardinalities:
        raise ValueError(
            f"cardinality mismatch: {p.cardinalities} vs {q.cardinalities}"
        )


def apply_permutation(p: IndependentPermutation, x) -> np.ndarray:
    """Apply ``p`` to one configuration (shape ``(d,)``) or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-1] != p.d:
        raise ValueError(f"configuration has {x.shape[-1]} features, expected {p.d}")
    if x.ndim == 1:
        return p.maps[np.arange(p.d), x]
    return p.maps[np.arange(p.d)[None, :], x]


def compose(outer: IndependentPermutation, inner: IndependentPermutation):
    """``outer o inner``: apply ``inner`` first."""
    _check_same(outer, inner)
    maps = np.take_along_axis(outer.maps, inner.maps, axis=1)
    return IndependentPermutation(maps, outer.cardinalities)


def invert(p: IndependentPermutation) -> IndependentPermutation:
    inv = np.empty_like(p.maps)
    np.put_along_axis(inv, p.maps, np.arange(p.maps.shape[1])[None, :], axis=1)
    return IndependentPermutation(inv, p.cardinalities)


def permute_counts(p: IndependentPermutation, c: np.ndarray) -> np.ndarray:
    """Move counts with their categories: ``out[j, p(j, a)] = c[j, a]``."""
    c = np.asarray(c)
    if c.shape != p.maps.shape:
        raise ValueError(f"count shape {c.shape} does not match {p.maps.shape}")
    out = np.zeros_like(c)
    np.put_along_axis(out, p.maps, c, axis=1)
    return out


def count_matrix(values: np.ndarray, cardinalities: Sequence[int]) -> np.ndarray:
    """Per-feature category counts as a ``(d, k_max)`` int array."""
    values = np.asarray(values, dtype=np.int64)
    d = len(cardinalities)
    kmax = max(cardinalities)
    if values.size == 0:
        return np.zeros((d, kmax), dtype=np.int64)
    flat = values + (np.arange(d) * kmax)[None, :]
    return np.bincount(flat.ravel(), minlength=d * kmax).reshape(d, kmax)


def empirical_nll(counts: np.ndarray) -> np.ndarray:
    """Total NLL in nats of each count row under its own empirical frequencies.

    Computed as ``n ln n - sum c ln c`` over the ascending-sorted row so that
    rows holding the same multiset of counts give bit-identical results.
    """
    c = np.sort(np.asarray(counts, dtype=np.float64), axis=-1)
    n = c.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        clogc = np.where(c > 0, c * np.log(np.where(c > 0, c, 1.0)), 0.0)
        nlogn = np.where(n > 0, n * np.log(np.where(n > 0, n, 1.0)), 0.0)
    return nlogn - clogc.sum(axis=-1)


def marginal_entropies(values: np.ndarray, cardinalities: Sequence[int]) -> np.ndarray:
    """Per-feature empirical entropies (nats) of a data matrix."""
    values = np.asarray(values)
    n = values.shape[0]
    if n == 0:
        raise ValueError("entropy of an empty dataset is undefined")
    return empirical_nll(count_matrix(values, cardinalities)) / n


@dataclass(frozen=True, eq=False)
class NodeDomain:
    """Allowed category values per feature, as a boolean ``(d, k_max)`` mask."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError("domain mask must be 2-D")
        if not np.all(m.any(axis=1)):
            raise ValueError("every feature domain must be nonempty")
        object.__setattr__(self, "mask", _frozen(m))

    @classmethod
    def full(cls, cardinalities: Sequence[int]) -> "NodeDomain":
        cards = _as_cards(cardinalities)
        return cls(np.arange(max(cards))[None, :] < np.array(cards)[:, None])

    @classmethod
    def from_sets(cls, sets: Sequence[Iterable[int]], k_max: int) -> "NodeDomain":
        m = np.zeros((len(sets), k_max), dtype=bool)
        for j, s in enumerate(sets):
            m[j, list(s)] = True
        return cls(m)

    @property
    def per_feature(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(np.flatnonzero(row).tolist()) for row in self.mask)

    def values(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.mask[j])

    def size(self, j: int) -> int:
        return int(self.mask[j].sum())

    def sizes(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Membership of configurations ``x`` (``(d,)`` or ``(n, d)``)."""
        x = np.asarray(x, dtype=np.int64)
        d = self.mask.shape[0]
        if x.ndim == 1:
            return bool(self.mask[np.arange(d), x].all())
        return self.mask[np.arange(d)[None, :], x].all(axis=1)

    def image(self, p: IndependentPermutation) -> "NodeDomain":
        """The set ``{p(x) : x in self}``, again a product set."""
        m = np.zeros_like(self.mask)
        np.put_along_axis(m, p.maps, self.mask, axis=1)
        return NodeDomain(m)

    def split(self, s: int, left_values: Iterable[int]):
        """Partition on feature ``s`` into ``(left, right)`` domains."""
        v = np.zeros(self.mask.shape[1], dtype=bool)
        v[list(left_values)] = True
        left = self.mask.copy()
        right = self.mask.copy()
        left[s] &= v
        right[s] &= ~v
        return NodeDomain(left), NodeDomain(right)

    def __eq__(self, other):
        if not isinstance(other, NodeDomain):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.mask.tobytes())

    def __repr__(self):
        return f"NodeDomain({[sorted(s) for s in self.per_feature]})"


def configuration_space_size(cardinalities: Sequence[int]) -> int:
    size = 1
    for k in cardinalities:
        size *= int(k)
    return size


def all_configurations(cardinalities: Sequence[int], limit: int = 10**6) -> np.ndarray:
    """Every configuration in lexicographic order (last feature fastest)."""
    size = configuration_space_size(cardinalities)
    if size > limit:
        raise ValueError(
            f"configuration space has {size} elements, above the limit {limit}"
        )
    grids = np.meshgrid(*[np.arange(k) for k in cardinalities], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def configuration_index(x: np.ndarray, cardinalities: Sequence[int]) -> np.ndarray:
    """Lexicographic rank of each configuration; inverse of ``all_configurations``."""
    return np.ravel_multi_index(tuple(np.asarray(x).T), tuple(cardinalities))
