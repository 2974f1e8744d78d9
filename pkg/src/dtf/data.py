"""Loading categorical CSVs and generating the synthetic benchmarks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .core import CategoricalDataset
from .learn import make_rng

__all__ = [
    "EncodingMap",
    "CopulaSpec",
    "COPULA_PRESETS",
    "load_csv",
    "read_csv_text",
    "write_csv",
    "split_train_test",
    "gen_eight_gaussian",
    "eight_gaussian_bins",
    "cycle_total_correlation",
    "solve_cycle_epsilon",
    "gen_copula",
]


@dataclass(frozen=True)
class EncodingMap:
    """Raw labels for each column; ``None`` marks an integer column kept as is."""

    labels: tuple[tuple[str, ...] | None, ...]

    def decode(self, values: np.ndarray) -> list[list[str]]:
        rows = []
        for row in np.atleast_2d(values):
            rows.append(
                [
                    str(int(v)) if lab is None else lab[int(v)]
                    for v, lab in zip(row, self.labels)
                ]
            )
        return rows


def _is_int(cell: str) -> bool:
    cell = cell.strip()
    return cell.isdigit()


def _detect_header(rows: list[list[str]], encoding: "EncodingMap | None" = None) -> bool:
    first, rest = rows[0], rows[1:]
    if encoding is not None and len(encoding.labels) == len(first):
        # a data row holds known labels and integers only
        return not all(
            _is_int(c) if lab is None else c.strip() in lab
            for c, lab in zip(first, encoding.labels)
        )
    if not rest:
        return not all(_is_int(c) for c in first)
    int_cols = [all(_is_int(r[j]) for r in rest) for j in range(len(first))]
    if any(ic and not _is_int(c) for ic, c in zip(int_cols, first)):
        return True
    if any(int_cols):
        return False
    # all-string columns: treat the first row as a header when none of its
    # cells shows up again in its column
    return all(first[j] not in {r[j] for r in rest} for j in range(len(first)))


def read_csv_text(
    text: str,
    header: bool | None = None,
    cardinalities: Sequence[int] | None = None,
    encoding: EncodingMap | None = None,
) -> tuple[CategoricalDataset, EncodingMap]:
    """Parse CSV text into a dataset.

    Columns whose cells are all nonnegative integers pass through with
    cardinality ``max + 1``. Other columns are coded by order of first
    appearance. ``encoding`` reuses the codes of an earlier load (a test
    split, say) and ``cardinalities`` overrides the inferred ones.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty CSV")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"ragged CSV: row {i} has {len(r)} cells, expected {width}")
    if header is None:
        header = _detect_header(rows, encoding)
    names = tuple(c.strip() for c in rows[0]) if header else None
    body = rows[1:] if header else rows
    if encoding is not None and len(encoding.labels) != width:
        raise ValueError("encoding does not match the number of columns")

    n = len(body)
    values = np.zeros((n, width), dtype=np.int64)
    labels: list[tuple[str, ...] | None] = []
    for j in range(width):
        col = [r[j].strip() for r in body]
        known = encoding.labels[j] if encoding is not None else None
        if encoding is not None and known is None or (
            encoding is None and all(_is_int(c) for c in col)
        ):
            if not all(_is_int(c) for c in col):
                raise ValueError(f"column {j} expected integers")
            values[:, j] = [int(c) for c in col]
            labels.append(None)
            continue
        if known is not None:
            index = {lab: code for code, lab in enumerate(known)}
            missing = sorted(set(col) - index.keys())
            if missing:
                raise ValueError(f"column {j} has labels not in the encoding: {missing}")
            labels.append(known)
        else:
            index = {}
            for c in col:
                index.setdefault(c, len(index))
            labels.append(tuple(index))
        values[:, j] = [index[c] for c in col]

    inferred = []
    for j, lab in enumerate(labels):
        if lab is not None:
            inferred.append(len(lab))
        else:
            inferred.append(int(values[:, j].max()) + 1 if n else 1)
    if cardinalities is not None:
        cards = [int(k) for k in cardinalities]
        if len(cards) != width:
            raise ValueError(f"schema has {len(cards)} columns, CSV has {width}")
        for j, (k, need) in enumerate(zip(cards, inferred)):
            if k < need:
                raise ValueError(f"column {j} needs cardinality >= {need}, schema gives {k}")
    else:
        cards = inferred
    data = CategoricalDataset(values.reshape(n, width), tuple(cards), names)
    return data, EncodingMap(tuple(labels))


def load_csv(
    path: str | Path,
    header: bool | None = None,
    cardinalities: Sequence[int] | None = None,
    encoding: EncodingMap | None = None,
) -> tuple[CategoricalDataset, EncodingMap]:
    text = Path(path).read_text(encoding="utf-8")
    return read_csv_text(text, header, cardinalities, encoding)


def write_csv(
    path: str | Path, data: CategoricalDataset, encoding: EncodingMap | None = None
) -> None:
    """Write with a header row; string-coded columns are written as labels."""
    names = data.column_names or tuple(f"x{j}" for j in range(data.d))
    rows = encoding.decode(data.values) if encoding is not None else data.values.tolist()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(rows)


def split_train_test(
    data: CategoricalDataset, fraction: float, seed: int
) -> tuple[CategoricalDataset, CategoricalDataset]:
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    n_train = int(round(fraction * data.n))
    if n_train == 0 or n_train == data.n:
        raise ValueError(f"{data.n} rows are too few to split at {fraction}")
    order = make_rng(seed).permutation(data.n)
    return data.subset(order[:n_train]), data.subset(order[n_train:])


# Means on a circle of radius 2 with component std 0.1, binned at width
# 0.05 so that 91 bins cover [-2.275, 2.275].
EIGHT_GAUSSIAN_RADIUS = 2.0
EIGHT_GAUSSIAN_STD = 0.1
EIGHT_GAUSSIAN_BINS = 91
EIGHT_GAUSSIAN_HALF_RANGE = 2.275


def eight_gaussian_bins(points: np.ndarray) -> np.ndarray:
    """Equal-width binning of real points into ``{0..90}`` per axis."""
    width = 2 * EIGHT_GAUSSIAN_HALF_RANGE / EIGHT_GAUSSIAN_BINS
    idx = np.floor((points + EIGHT_GAUSSIAN_HALF_RANGE) / width).astype(np.int64)
    return np.clip(idx, 0, EIGHT_GAUSSIAN_BINS - 1)


def gen_eight_gaussian(
    n: int = 12800, seed: int = 0, train_fraction: float = 0.8
) -> tuple[CategoricalDataset, CategoricalDataset]:
    """Quantized mixture of eight Gaussians on a circle; ``d = 2, k = 91``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = make_rng(seed)
    comp = rng.integers(0, 8, size=n)
    angle = 2 * np.pi * comp / 8
    means = EIGHT_GAUSSIAN_RADIUS * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    points = means + EIGHT_GAUSSIAN_STD * rng.standard_normal((n, 2))
    data = CategoricalDataset(eight_gaussian_bins(points), (EIGHT_GAUSSIAN_BINS,) * 2)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return data.subset(slice(0, n_train)), data.subset(slice(n_train, n))


@dataclass(frozen=True)
class CopulaSpec:
    d: int = 4
    target_total_correlation: float = 1.0
    bernoulli_p: tuple[float, ...] = (0.5, 0.3, 0.5, 0.2)
    n: int = 10000
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("the cycle graph needs d >= 3")
        if len(self.bernoulli_p) != self.d:
            raise ValueError("bernoulli_p must have length d")
        if not all(0 < p < 1 for p in self.bernoulli_p):
            raise ValueError("every bernoulli_p must lie in (0, 1)")
        if self.target_total_correlation < 0:
            raise ValueError("total correlation must be >= 0")
        if self.n < 2:
            raise ValueError("n must be >= 2")


COPULA_PRESETS = {"H": 100.0, "M": 10.0, "W": 1.0}


# The precision matrix is I - w * A for the cycle adjacency A, written
# through eps = 1 - 2w in (0, 1]. It is circulant, so the real Fourier basis
# diagonalizes it with eigenvalues 2 sin^2(theta/2) + eps cos(theta).


def _cycle_angles(d: int) -> np.ndarray:
    return 2 * np.pi * np.arange(d) / d


def _cycle_eigs_rest(d: int, eps: float) -> np.ndarray:
    """Eigenvalues for every frequency but zero (whose eigenvalue is eps)."""
    theta = _cycle_angles(d)[1:]
    return 2 * np.sin(theta / 2) ** 2 + eps * np.cos(theta)


def _log_diag(d: int, log_eps: float) -> float:
    eps = math.exp(log_eps)
    rest = _cycle_eigs_rest(d, eps)
    return -math.log(d) - log_eps + math.log1p(eps * float(np.sum(1.0 / rest)))


def cycle_total_correlation(d: int, log_eps: float) -> float:
    """Total correlation ``-1/2 ln det R`` of the cycle model at ``ln eps``."""
    rest = _cycle_eigs_rest(d, math.exp(log_eps))
    log_det_precision = log_eps + float(np.sum(np.log(rest)))
    return 0.5 * (d * _log_diag(d, log_eps) + log_det_precision)


def solve_cycle_epsilon(d: int, target: float, tol: float = 1e-9) -> float:
    """``ln eps`` at which the cycle model reaches the target total correlation."""
    lo, hi = -700.0, 0.0
    if target == 0:
        return 0.0
    if cycle_total_correlation(d, lo) < target:
        raise ValueError(f"total correlation {target} is out of reach for a {d}-cycle")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if cycle_total_correlation(d, mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 or abs(cycle_total_correlation(d, mid) - target) < tol:
            break
    return 0.5 * (lo + hi)


def _fourier_basis(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal real eigenbasis of a symmetric circulant; returns (V, freq)."""
    i = np.arange(d)
    cols, freq = [np.full(d, 1 / math.sqrt(d))], [0]
    for m in range(1, (d - 1) // 2 + 1):
        th = 2 * np.pi * m * i / d
        cols += [math.sqrt(2 / d) * np.cos(th), math.sqrt(2 / d) * np.sin(th)]
        freq += [m, m]
    if d % 2 == 0:
        cols.append((-1.0) ** i / math.sqrt(d))
        freq.append(d // 2)
    return np.stack(cols, axis=1), np.array(freq)


def gen_copula(spec: CopulaSpec) -> tuple[CategoricalDataset, CategoricalDataset]:
    """Binary data from a Gaussian copula on a cycle graph.

    Correlated normals are standardized, pushed through the normal CDF and
    thresholded so that feature ``j`` is 1 with probability ``p_j``.
    """
    d = spec.d
    log_eps = solve_cycle_epsilon(d, spec.target_total_correlation)
    eps = math.exp(log_eps)
    V, freq = _fourier_basis(d)
    lam = np.concatenate([[eps], _cycle_eigs_rest(d, eps)])[freq]
    # correlation eigenvalues are 1 / (diag * lam); scale by the diagonal in logs
    corr_eigs = np.exp(-_log_diag(d, log_eps) - np.log(lam))
    rng = make_rng(spec.seed)
    g = rng.standard_normal((spec.n, d))
    y = (g * np.sqrt(corr_eigs)[None, :]) @ V.T
    y = (y - y.mean(axis=0)) / y.std(axis=0)
    u = ndtr(y)
    p = np.asarray(spec.bernoulli_p)
    x = (u > 1 - p[None, :]).astype(np.int64)
    data = CategoricalDataset(x, (2,) * d)
    n_train = min(max(int(round(spec.train_fraction * spec.n)), 1), spec.n - 1)
    return data.subset(slice(0, n_train)), data.subset(slice(n_train, spec.n))
