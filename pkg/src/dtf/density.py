"""Discrete tree flows: a stack of TSPs over an independent categorical base.

A configuration ``x`` is pushed through every TSP in order and scored under
the base. Permutations do not change volume, so that score is the exact
log-probability of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import CategoricalDataset, marginal_entropies
from .learn import FitConfig, fit_tsp, make_rng
from .tsp import Tsp, forward, inverse

__all__ = [
    "IndependentBase",
    "DtfModel",
    "fit_base",
    "transform",
    "log_likelihood",
    "mean_nll",
    "fit_dtf",
    "sample",
    "sample_latent",
]


@dataclass(frozen=True, eq=False)
class IndependentBase:
    """Per-feature categorical distribution with additive smoothing.

    Stored as the raw counts it was fitted on so it round-trips exactly;
    ``probs`` is recomputed from them.
    """

    counts: np.ndarray
    cardinalities: tuple[int, ...]
    pseudocount: float = 1.0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        cards = tuple(int(k) for k in self.cardinalities)
        if counts.shape != (len(cards), max(cards)):
            raise ValueError(f"counts shape {counts.shape} does not match {cards}")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.pseudocount < 0:
            raise ValueError("pseudocount must be >= 0")
        sums = counts.sum(axis=1)
        if np.any(sums != sums[0]):
            raise ValueError("every feature must have the same total count")
        if sums[0] == 0 and self.pseudocount == 0:
            raise ValueError("an empty base needs a positive pseudocount")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "pseudocount", float(self.pseudocount))

    @property
    def n(self) -> int:
        return int(self.counts[0].sum())

    @property
    def probs(self) -> np.ndarray:
        """``(d, k_max)`` probabilities, zero beyond each feature's cardinality."""
        cards = np.array(self.cardinalities)
        inside = np.arange(self.counts.shape[1])[None, :] < cards[:, None]
        alpha = self.pseudocount
        p = (self.counts + alpha) / (self.n + alpha * cards)[:, None]
        return np.where(inside, p, 0.0)

    def rows(self) -> list[np.ndarray]:
        p = self.probs
        return [p[j, :k] for j, k in enumerate(self.cardinalities)]

    def log_prob(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.int64))
        d = len(self.cardinalities)
        p = self.probs[np.arange(d)[None, :], z]
        with np.errstate(divide="ignore"):
            return np.log(p).sum(axis=1)


def fit_base(data: CategoricalDataset, pseudocount: float = 1.0) -> IndependentBase:
    if data.n == 0:
        raise ValueError("cannot fit a base distribution to an empty dataset")
    return IndependentBase(data.counts(), data.cardinalities, pseudocount)


@dataclass(eq=False)
class DtfModel:
    tsps: list[Tsp]
    base: IndependentBase
    cardinalities: tuple[int, ...]
    column_names: tuple[str, ...] | None = None
    # per-column raw labels when the training data was string-encoded
    encoding: list[list[str]] | None = None
    fit_metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.cardinalities = tuple(int(k) for k in self.cardinalities)
        if self.base.cardinalities != self.cardinalities:
            raise ValueError("base cardinalities differ from the model's")
        for i, t in enumerate(self.tsps):
            if t.cardinalities != self.cardinalities:
                raise ValueError(f"TSP {i} cardinalities differ from the model's")

    @property
    def d(self) -> int:
        return len(self.cardinalities)

    def num_parameters(self) -> int:
        return sum(t.num_parameters() for t in self.tsps)


def _values(data) -> np.ndarray:
    if isinstance(data, CategoricalDataset):
        return data.values
    return np.asarray(data, dtype=np.int64)


def transform(model: DtfModel, x) -> np.ndarray:
    """Push configurations through every TSP in order."""
    z = np.atleast_2d(_values(x))
    for t in model.tsps:
        z, _ = forward(t, z)
    return z


def log_likelihood(model: DtfModel, x):
    """Exact log-probability in nats; ``-inf`` for zero-mass configurations.

    Returns a float for a single configuration and an array for a batch.
    """
    vals = _values(x)
    single = vals.ndim == 1
    if vals.shape[-1] != model.d:
        raise ValueError(f"data has {vals.shape[-1]} features, model expects {model.d}")
    ll = model.base.log_prob(transform(model, vals))
    return float(ll[0]) if single else ll


def mean_nll(model: DtfModel, data) -> float:
    """Mean negative log-likelihood per sample in nats."""
    ll = log_likelihood(model, np.atleast_2d(_values(data)))
    if ll.size == 0:
        raise ValueError("mean NLL of an empty dataset is undefined")
    return float(-ll.mean())


def fit_dtf(
    train: CategoricalDataset, cfg: FitConfig, pseudocount: float = 1.0
) -> DtfModel:
    """Fit ``cfg.num_tsps`` TSPs greedily, each on the previous stage's output.

    The trace holds the unsmoothed train NLL before any TSP and after each
    one; every entry is the sum of per-feature empirical entropies of the
    data at that stage.
    """
    if train.n == 0:
        raise ValueError("cannot fit a model to an empty dataset")
    rng = make_rng(cfg.seed)
    current = train
    tsps = []
    trace = [float(marginal_entropies(current.values, current.cardinalities).sum())]
    for _ in range(cfg.num_tsps):
        t, current = fit_tsp(current, cfg, rng)
        tsps.append(t)
        trace.append(float(marginal_entropies(current.values, current.cardinalities).sum()))
    base = fit_base(current, pseudocount)
    meta = {
        "criterion": cfg.criterion,
        "seed": int(cfg.seed),
        "max_depth": int(cfg.max_depth),
        "min_samples_split": int(cfg.min_samples_split),
        "num_tsps": int(cfg.num_tsps),
        "train_nll_trace": trace,
    }
    return DtfModel(tsps, base, train.cardinalities, train.column_names, None, meta)


def sample_latent(model: DtfModel, count: int, seed: int) -> np.ndarray:
    """Independent per-feature draws from the base, by inverse CDF."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if model.base.pseudocount == 0 and any(np.any(r == 0) for r in model.base.rows()):
        raise ValueError(
            "the base has zero-probability categories (pseudocount 0); "
            "refit with a positive pseudocount to sample"
        )
    probs = model.base.probs
    u = make_rng(seed).random((count, model.d))
    z = np.empty((count, model.d), dtype=np.int64)
    for j, k in enumerate(model.cardinalities):
        row = probs[j, :k]
        cdf = np.cumsum(row)
        last = int(np.flatnonzero(row > 0)[-1])
        z[:, j] = np.minimum(np.searchsorted(cdf, u[:, j] * cdf[-1], side="right"), last)
    return z


def sample(model: DtfModel, count: int, seed: int) -> CategoricalDataset:
    """Draw exact samples by inverting the flow on independent base draws."""
    x = sample_latent(model, count, seed)
    for t in reversed(model.tsps):
        x = inverse(t, x)
    return CategoricalDataset(x, model.cardinalities, model.column_names)
