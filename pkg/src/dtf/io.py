"""JSON persistence for fitted models.

Permutations, domains and base counts are stored as integers so that a
save, load, save cycle is byte-identical. Base probabilities are recomputed
from the counts on load.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .core import IndependentPermutation
from .density import DtfModel, IndependentBase
from .tsp import Tsp, TspNode, check_invertibility

__all__ = [
    "FORMAT_VERSION",
    "ModelFormatError",
    "model_to_dict",
    "model_from_dict",
    "dumps_model",
    "loads_model",
    "save_model",
    "load_model",
]

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _node_to_dict(node: TspNode) -> dict[str, Any]:
    out: dict[str, Any] = {
        "node_id": node.node_id,
        "perm": node.perm.rows(),
        "domain": [sorted(s) for s in node.domain.per_feature],
    }
    if not node.is_leaf:
        out["split_feature"] = node.split_feature
        out["left_values"] = sorted(node.left_values)
        out["children"] = [_node_to_dict(node.left), _node_to_dict(node.right)]
    return out


def model_to_dict(model: DtfModel) -> dict[str, Any]:
    base = model.base
    return {
        "format_version": FORMAT_VERSION,
        "cardinalities": list(model.cardinalities),
        "column_names": list(model.column_names) if model.column_names else None,
        "encoding": model.encoding,
        "base": {
            "counts": [base.counts[j, :k].tolist() for j, k in enumerate(base.cardinalities)],
            "n": base.n,
            "pseudocount": base.pseudocount,
        },
        "tsps": [{"max_depth": t.max_depth, "root": _node_to_dict(t.root)} for t in model.tsps],
        "fit_metadata": model.fit_metadata,
    }


def _node_from_dict(rec: dict[str, Any], cards: tuple[int, ...]) -> TspNode:
    try:
        perm = IndependentPermutation.from_rows(rec["perm"])
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(f"node {rec.get('node_id')}: {exc}") from None
    if perm.cardinalities != cards:
        raise ModelFormatError(f"node {rec.get('node_id')}: permutation rows do not match cardinalities")
    if "children" in rec:
        left, right = (_node_from_dict(c, cards) for c in rec["children"])
        return TspNode(
            perm=perm,
            split_feature=int(rec["split_feature"]),
            left_values=frozenset(rec["left_values"]),
            left=left,
            right=right,
        )
    return TspNode(perm=perm)


def _check_ids_and_domains(rec: dict[str, Any], node: TspNode) -> None:
    if rec["node_id"] != node.node_id:
        raise ModelFormatError(f"node id {rec['node_id']} is not in breadth-first order")
    if [sorted(s) for s in node.domain.per_feature] != rec["domain"]:
        raise ModelFormatError(f"node {node.node_id}: stored domain disagrees with the tree")
    for child_rec, child in zip(rec.get("children", []), node.children()):
        _check_ids_and_domains(child_rec, child)


def model_from_dict(obj: dict[str, Any], strict: bool = True) -> DtfModel:
    """Rebuild a model.

    ``strict`` also verifies stored ids and domains and that every TSP is
    invertible. The audit command loads non-strictly so it can report on a
    damaged file instead of refusing it.
    """
    version = obj.get("format_version")
    if not isinstance(version, int):
        raise ModelFormatError("missing format_version")
    if version > FORMAT_VERSION:
        raise ModelFormatError(
            f"model format {version} is newer than the supported version {FORMAT_VERSION}"
        )
    cards = tuple(int(k) for k in obj["cardinalities"])
    kmax = max(cards)
    b = obj["base"]
    counts = np.zeros((len(cards), kmax), dtype=np.int64)
    for j, row in enumerate(b["counts"]):
        if len(row) != cards[j]:
            raise ModelFormatError(f"base counts for feature {j} have the wrong length")
        counts[j, : cards[j]] = row
    base = IndependentBase(counts, cards, b["pseudocount"])
    if base.n != b["n"]:
        raise ModelFormatError("base counts do not sum to n")
    tsps = []
    for i, rec in enumerate(obj["tsps"]):
        root = _node_from_dict(rec["root"], cards)
        try:
            t = Tsp(root, cards, max_depth=rec["max_depth"])
        except ValueError as exc:
            raise ModelFormatError(f"TSP {i}: {exc}") from None
        if strict:
            _check_ids_and_domains(rec["root"], t.root)
            report = check_invertibility(t)
            if not report.ok:
                raise ModelFormatError(f"TSP {i} is not invertible: {report.messages[0]}")
        tsps.append(t)
    names = obj.get("column_names")
    return DtfModel(
        tsps,
        base,
        cards,
        tuple(names) if names else None,
        obj.get("encoding"),
        obj.get("fit_metadata", {}),
    )


def dumps_model(model: DtfModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def loads_model(text: str, strict: bool = True) -> DtfModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a model file: {exc}") from None
    try:
        return model_from_dict(obj, strict)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc!r}") from None


def save_model(model: DtfModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path: str | Path, strict: bool = True) -> DtfModel:
    return loads_model(Path(path).read_text(encoding="utf-8"), strict)
