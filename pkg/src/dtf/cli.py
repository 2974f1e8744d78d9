"""Command-line interface: ``dtf gen | fit | eval | sample | check``.

Exit codes: 0 success, 1 error, 2 usage, 3 failed audit or size guard.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Sequence

import numpy as np

from .core import CategoricalDataset, configuration_space_size
from .data import (
    COPULA_PRESETS,
    CopulaSpec,
    EncodingMap,
    gen_copula,
    gen_eight_gaussian,
    load_csv,
    write_csv,
)
from .density import fit_dtf, log_likelihood, sample
from .io import ModelFormatError, load_model, save_model
from .learn import CRITERIA, FitConfig, check_rank_consistency
from .tsp import EXHAUSTIVE_LIMIT, check_bijection_exhaustive, check_invertibility, forward

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2, 3
LN2 = math.log(2)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DTF_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"DTF_SEED must be an integer, got {env!r}") from None


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _total_correlation(text: str) -> float:
    if text.upper() in COPULA_PRESETS:
        return COPULA_PRESETS[text.upper()]
    return float(text)


def _fmt(nats: float, bits: bool) -> str:
    value = nats / LN2 if bits else nats
    return f"{value:.4f} {'bits' if bits else 'nats'}"


def _describe(name: str, data: CategoricalDataset) -> str:
    ks = ",".join(str(k) for k in data.cardinalities)
    return f"{name}: n={data.n} d={data.d} k=[{ks}]"


def cmd_gen(args) -> int:
    seed = _seed(args)
    if args.dataset == "8gauss":
        train, test = gen_eight_gaussian(args.n or 12800, seed)
    else:
        p = tuple(args.p) if args.p else (0.5, 0.3, 0.5, 0.2)
        spec = CopulaSpec(
            d=len(p),
            target_total_correlation=args.tc,
            bernoulli_p=p,
            n=args.n or 10000,
            seed=seed,
        )
        train, test = gen_copula(spec)
    write_csv(args.out_train, train)
    write_csv(args.out_test, test)
    print(_describe("train", train))
    print(_describe("test", test))
    return EXIT_OK


def _model_encoding(model) -> EncodingMap | None:
    if not model.encoding:
        return None
    return EncodingMap(tuple(tuple(c) if c is not None else None for c in model.encoding))


def _load_for_model(path: str, model) -> CategoricalDataset:
    """Load a CSV with the model's cardinalities and string codes."""
    try:
        data, _ = load_csv(path, cardinalities=model.cardinalities, encoding=_model_encoding(model))
    except ValueError as exc:
        raise ValueError(f"data does not match the model: {exc}") from None
    return data


def cmd_fit(args) -> int:
    train, enc = load_csv(args.train, cardinalities=args.cardinalities)
    cfg = FitConfig(
        max_depth=args.max_depth,
        min_samples_split=args.min_split,
        criterion=args.criterion,
        seed=_seed(args),
        num_tsps=args.num_tsps,
    )
    model = fit_dtf(train, cfg, args.pseudocount)
    if any(lab is not None for lab in enc.labels):
        model.encoding = [list(lab) if lab is not None else None for lab in enc.labels]
    save_model(model, args.model)
    print(_describe("train", train))
    for stage, nll in enumerate(model.fit_metadata["train_nll_trace"]):
        print(f"stage {stage}: train NLL {_fmt(nll, args.bits)}")
    print(f"parameters: {model.num_parameters()}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    data = _load_for_model(args.data, model)
    ll = log_likelihood(model, data.values)
    nll = -ll
    finite = np.isfinite(nll)
    if args.per_row:
        print("row,nll")
        for i, v in enumerate(nll):
            print(f"{i},{v / LN2 if args.bits else v:.6f}")
    print(f"rows: {data.n}")
    mean = float(nll.mean()) if data.n else float("nan")
    print(f"mean NLL: {_fmt(mean, args.bits)}")
    if not finite.all():
        print(f"zero-probability rows: {int((~finite).sum())}")
        if finite.any():
            print(f"mean NLL over the rest: {_fmt(float(nll[finite].mean()), args.bits)}")
    return EXIT_OK


def cmd_sample(args) -> int:
    model = load_model(args.model)
    drawn = sample(model, args.n, _seed(args))
    write_csv(args.out, drawn, _model_encoding(model))
    print(f"wrote {drawn.n} rows to {args.out}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        model = load_model(args.model, strict=False)
    except ModelFormatError as exc:
        print(f"model: FAIL ({exc})")
        return EXIT_AUDIT
    data = _load_for_model(args.data, model) if args.data else None
    if args.exhaustive:
        size = configuration_space_size(model.cardinalities)
        if size > EXHAUSTIVE_LIMIT:
            print(
                f"exhaustive check refused: {size} configurations exceed "
                f"the limit {EXHAUSTIVE_LIMIT}"
            )
            return EXIT_AUDIT
    header = ["tsp", "invertible"]
    if args.exhaustive:
        header.append("bijection")
    if data is not None:
        header.append("rank_consistent")
    print("  ".join(header))
    all_ok = True
    current = data
    for i, t in enumerate(model.tsps):
        cells = [str(i)]
        report = check_invertibility(t)
        ok = report.ok
        cells.append("pass" if report.ok else "FAIL")
        if args.exhaustive:
            bij = check_bijection_exhaustive(t)
            ok &= bij
            cells.append("pass" if bij else "FAIL")
        if current is not None:
            rc = report.ok and check_rank_consistency(t, current)
            ok &= rc
            cells.append("pass" if rc else "FAIL")
            if report.ok:
                current = current.with_values(forward(t, current.values)[0])
        print("  ".join(cells))
        for msg in report.messages:
            print(f"  {msg}")
        all_ok &= ok
    if not model.tsps:
        print("(no TSPs)")
    print("all checks passed" if all_ok else "some checks FAILED")
    return EXIT_OK if all_ok else EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtf", description="Discrete tree flows")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--dataset", choices=["8gauss", "copula"], required=True)
    g.add_argument("--tc", type=_total_correlation, default=1.0,
                   help="copula total correlation in nats, or a preset H, M or W")
    g.add_argument("--p", type=_float_list, help="comma-separated Bernoulli parameters")
    g.add_argument("--n", type=int, help="total number of rows")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-train", required=True)
    g.add_argument("--out-test", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit a model to a CSV")
    f.add_argument("--train", required=True)
    f.add_argument("--criterion", choices=CRITERIA, default="glp")
    f.add_argument("--num-tsps", type=int, default=1)
    f.add_argument("--max-depth", type=int, default=2)
    f.add_argument("--min-split", type=int, default=2)
    f.add_argument("--pseudocount", type=float, default=1.0)
    f.add_argument("--seed", type=int)
    f.add_argument("--model", required=True)
    f.add_argument("--cardinalities", type=_int_list,
                   help="comma-separated per-column category counts, overriding inference")
    f.add_argument("--bits", action="store_true")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="mean NLL of a CSV under a model")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--per-row", action="store_true")
    e.add_argument("--bits", action="store_true")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sample", help="draw samples from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    c = sub.add_parser("check", help="audit a model")
    c.add_argument("--model", required=True)
    c.add_argument("--data")
    c.add_argument("--exhaustive", action="store_true")
    c.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"dtf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
