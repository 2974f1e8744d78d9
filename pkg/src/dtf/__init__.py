"""Discrete tree flows: invertible tree-structured permutations for categorical density estimation."""

from .core import (
    CategoricalDataset,
    IndependentPermutation,
    NodeDomain,
    apply_permutation,
    compose,
    count_matrix,
    empirical_nll,
    invert,
    marginal_entropies,
    permute_counts,
)
from .density import DtfModel, IndependentBase, fit_base, fit_dtf, log_likelihood, mean_nll, sample
from .learn import FitConfig, check_rank_consistency, fit_tsp
from .tsp import Tsp, TspNode, check_bijection_exhaustive, check_invertibility, forward, inverse

__version__ = "0.1.0"

__all__ = [
    "CategoricalDataset",
    "IndependentPermutation",
    "NodeDomain",
    "apply_permutation",
    "compose",
    "count_matrix",
    "empirical_nll",
    "invert",
    "marginal_entropies",
    "permute_counts",
    "DtfModel",
    "IndependentBase",
    "fit_base",
    "fit_dtf",
    "log_likelihood",
    "mean_nll",
    "sample",
    "FitConfig",
    "check_rank_consistency",
    "fit_tsp",
    "Tsp",
    "TspNode",
    "check_bijection_exhaustive",
    "check_invertibility",
    "forward",
    "inverse",
]
