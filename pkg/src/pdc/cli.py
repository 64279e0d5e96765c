"""Command-line interface: generate, fit, predict, evaluate, pca, sweep.

Outputs are plot-ready CSVs written atomically; each report CSV also
gets a PNG rendering with the same stem (suppress with --no-figures).
Exit codes: 0 success, 2 parse/usage error, 3 fit failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import figures
from .core import (
    AUTONOMOUS, PER_STEP, PERIODIC, FitFailureError, IllConditionedError,
    PdcError, SlotIndexer, evaluate_cost,
)
from .engine import FitConfig, fit
from .io import (
    ParseError, ingest_csv, read_config, read_model, write_dataset,
    write_model, write_table,
)
from .likelihood import isotropic_loglik, optimal_sigma
from .metrics import compare_models, prediction_report
from .pca import principal_components, spectrum_tail
from .synthetic import Auto2D, AutoMulti, Markov2D, Seasonal2D, generate

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_FIT = 3

_SCENARIOS = {"auto2d": Auto2D, "automulti": AutoMulti,
              "seasonal2d": Seasonal2D, "markov2d": Markov2D}


def _default_seed() -> int:
    env = os.environ.get("PDC_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ParseError(f"PDC_SEED must be an integer, got {env!r}")


def _parse_slots(text: str) -> SlotIndexer:
    if text in ("auto", AUTONOMOUS):
        return SlotIndexer(AUTONOMOUS)
    if text.startswith("periodic:"):
        try:
            return SlotIndexer(PERIODIC, int(text.split(":", 1)[1]))
        except ValueError:
            raise ParseError(f"bad period in slots spec {text!r}")
    if text in ("trend", PER_STEP):
        return SlotIndexer(PER_STEP)
    raise ParseError(f"slots must be auto, periodic:T or trend, got {text!r}")


def _parse_range(text: str) -> list[int]:
    """'2' -> [2]; '1..6' -> [1, 2, 3, 4, 5, 6]."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise ParseError(f"expected an integer or lo..hi range, got {text!r}")


def _resolve(args, config: dict, key: str, cast, default):
    """Flag value if given, else config-file value, else the default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        try:
            return cast(config[key])
        except (ValueError, PdcError) as exc:
            raise ParseError(f"config key {key!r}: {exc}")
    return default


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    return read_config(path) if path else {}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdc",
        description="Fit reduced predictive models to multivariate time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic benchmark dataset")
    g.add_argument("--scenario", required=True, choices=sorted(_SCENARIOS),
                   help="scenario family to draw from")
    g.add_argument("--seed", type=int, help="RNG seed (default: PDC_SEED or 0)")
    g.add_argument("--n", type=int, help="number of snapshots (scenario default if omitted)")
    g.add_argument("-o", "--output", required=True, help="dataset CSV to write")
    g.add_argument("--truth", help="also write the generating model here")

    f = sub.add_parser("fit", help="fit a reduced model to a dataset")
    f.add_argument("data", help="dataset CSV")
    f.add_argument("--m", type=int, help="reduced dimension")
    f.add_argument("--r", type=int, help="memory order (default 1)")
    f.add_argument("--slots", help="auto, periodic:T or trend (default auto)")
    f.add_argument("--steps", type=int, help="step budget (default 1000)")
    f.add_argument("--seed", type=int, help="RNG seed (default: PDC_SEED or 0)")
    f.add_argument("--eps", type=float, help="rotation clamp (default 0.5)")
    f.add_argument("--L0", type=float, help="initial trial length scale")
    f.add_argument("--Lf", type=float, help="final trial length scale")
    f.add_argument("--s-track", help="exogenous track to profile trials over")
    f.add_argument("-o", "--output", required=True, help="model file to write")
    f.add_argument("--trace", help="write the per-step cost trace CSV here")
    f.add_argument("--config", help="key=value option file (flags win)")
    f.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering next to report CSVs")

    p = sub.add_parser("predict", help="one-step predictions of a fitted model")
    p.add_argument("model", help="model file")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("-o", "--output", required=True, help="prediction CSV to write")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering next to report CSVs")

    e = sub.add_parser("evaluate", help="cost and recovery report for a model")
    e.add_argument("model", help="model file")
    e.add_argument("data", help="dataset CSV")
    e.add_argument("--truth", help="reference model for recovery errors")
    e.add_argument("-o", "--output", required=True, help="report CSV to write")

    c = sub.add_parser("pca", help="principal component spectrum of a dataset")
    c.add_argument("data", help="dataset CSV")
    c.add_argument("--m", type=int, help="highlight the tail beyond m components")
    c.add_argument("-o", "--output", required=True, help="spectrum CSV to write")
    c.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering next to report CSVs")

    s = sub.add_parser("sweep", help="fit over a grid of (m, r) orders")
    s.add_argument("data", help="dataset CSV")
    s.add_argument("--m", required=True, help="dimension range, e.g. 1..4")
    s.add_argument("--r", required=True, help="order range, e.g. 1..4")
    s.add_argument("--steps", type=int, help="step budget per fit (default 1000)")
    s.add_argument("--seed", type=int, help="base seed (default: PDC_SEED or 0)")
    s.add_argument("--slots", help="auto, periodic:T or trend (default auto)")
    s.add_argument("-o", "--output", required=True, help="sweep table CSV to write")
    s.add_argument("--config", help="key=value option file (flags win)")
    s.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering next to report CSVs")
    return parser


# -- commands ---------------------------------------------------------------


def _cmd_generate(args) -> int:
    cls = _SCENARIOS[args.scenario]
    kwargs = {"seed": args.seed if args.seed is not None else _default_seed()}
    if args.n is not None:
        kwargs["N"] = args.n
    series, truth, c_star = generate(cls(**kwargs))
    write_dataset(args.output, series,
                  comment=f"scenario={args.scenario} seed={kwargs['seed']} "
                          f"noise_floor={c_star:.17g}")
    if args.truth:
        write_model(args.truth, truth, seed=kwargs["seed"])
    return EXIT_OK


def _fit_config_from(args, config: dict) -> FitConfig:
    m = _resolve(args, config, "m", int, None)
    if m is None:
        raise ParseError("fit needs --m (or m= in the config file)")
    return FitConfig(
        m=m,
        r=_resolve(args, config, "r", int, 1),
        slots=_parse_slots(_resolve(args, config, "slots", str, "auto")),
        k_tot=_resolve(args, config, "steps", int, 1000),
        seed=_resolve(args, config, "seed", int, _default_seed()),
        eps_theta=_resolve(args, config, "eps", float, 0.5),
        L0=_resolve(args, config, "L0", float, None),
        Lf=_resolve(args, config, "Lf", float, None),
        s_track=_resolve(args, config, "s_track", str, None),
    )


def _cmd_fit(args) -> int:
    config = _load_config(args)
    fc = _fit_config_from(args, config)
    series = ingest_csv(args.data)
    model, report = fit(series, fc)
    write_model(args.output, model, seed=fc.seed,
                ledger=report.coefficient_ledger or None)
    if args.trace:
        rows = zip(range(len(report.cost_trace)), report.cost_trace,
                   report.accepted, report.trial_kinds)
        write_table(args.trace, ["step", "cost", "accepted", "trial"], rows,
                    comment=f"seed={fc.seed} final_cost={report.final_cost:.17g}")
        if not args.no_figures:
            figures.render_trace(figures.sibling_png(args.trace),
                                 report.cost_trace, report.accepted)
    print(f"fit: steps={report.steps} final_cost={report.final_cost:.17g} "
          f"wall={report.wall_time:.2f}s -> {args.output}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = read_model(args.model)
    series = ingest_csv(args.data)
    rep = prediction_report(model, series)
    names = series.channel_names or tuple(f"c{i + 1}" for i in range(model.n))
    header = (["time"] + [f"actual_{c}" for c in names]
              + [f"predicted_{c}" for c in names])
    t = series.times[rep.predicted_columns]
    rows = (list(row) for row in
            np.column_stack([t, rep.z_actual.T, rep.z_predicted.T]))
    write_table(args.output, header, rows,
                comment=f"aggregate_rmse={rep.aggregate_rmse:.17g}")
    if not args.no_figures:
        figures.render_prediction(figures.sibling_png(args.output), t,
                                  rep.z_actual, rep.z_predicted, names)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model = read_model(args.model)
    series = ingest_csv(args.data)
    total, normalized = evaluate_cost(model, series)
    sigma, degenerate = optimal_sigma(model, series)
    rows = [("total_cost", total), ("normalized_cost", normalized),
            ("optimal_sigma", sigma)]
    if not degenerate:
        rows.append(("loglik_at_optimal_sigma",
                     isotropic_loglik(model, series, sigma)))
    if args.truth:
        truth = read_model(args.truth)
        cmp = compare_models(truth, model)
        rows += [("e_Q", cmp.e_Q), ("e_A", cmp.e_A)]
    write_table(args.output, ["metric", "value"], rows)
    for key, value in rows:
        print(f"{key}={value:.17g}")
    return EXIT_OK


def _cmd_pca(args) -> int:
    series = ingest_csv(args.data)
    result = principal_components(series)
    N = series.n_snapshots
    n = series.n_channels
    tails = np.array([spectrum_tail(result, m, N) for m in range(1, n + 1)])
    rows = [(i + 1, result.singular_values[i], tails[i]) for i in range(n)]
    write_table(args.output, ["component", "singular_value", "tail"], rows)
    if args.m is not None:
        print(f"tail({args.m})={spectrum_tail(result, args.m, N):.17g}")
    if not args.no_figures:
        figures.render_pca(figures.sibling_png(args.output),
                           result.singular_values, tails)
    return EXIT_OK


def sweep_orders(series, m_range, r_range, base_config: FitConfig):
    """One fit per (m, r); rows of (m, r, cost, spectrum_tail(m), status).

    Seeds derive from the base seed by grid position; a failed fit is
    recorded in its row and the sweep continues.
    """
    result = principal_components(series)
    N = series.n_snapshots
    rows = []
    for idx, m in enumerate(sorted(m_range)):
        tail = spectrum_tail(result, m, N)
        for jdx, r in enumerate(sorted(r_range)):
            seed = base_config.seed + idx * len(r_range) + jdx
            cfg = dataclasses.replace(base_config, m=m, r=r, seed=seed)
            try:
                _, report = fit(series, cfg)
                rows.append((m, r, report.final_cost, tail, "ok"))
            except (FitFailureError, IllConditionedError, PdcError) as exc:
                rows.append((m, r, float("nan"), tail, f"failed: {exc}"))
    return rows


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    series = ingest_csv(args.data)
    m_range = _parse_range(args.m)
    r_range = _parse_range(args.r)
    n = series.n_channels
    if max(m_range) >= n:
        raise ParseError(f"m must stay below the channel count {n}")
    base = FitConfig(
        m=m_range[0],
        r=r_range[0],
        slots=_parse_slots(_resolve(args, config, "slots", str, "auto")),
        k_tot=_resolve(args, config, "steps", int, 1000),
        seed=_resolve(args, config, "seed", int, _default_seed()))
    rows = sweep_orders(series, m_range, r_range, base)
    write_table(args.output, ["m", "r", "cost", "tail", "status"], rows)
    if not args.no_figures:
        figures.render_sweep(figures.sibling_png(args.output), rows)
    return EXIT_OK


_COMMANDS = {"generate": _cmd_generate, "fit": _cmd_fit,
             "predict": _cmd_predict, "evaluate": _cmd_evaluate,
             "pca": _cmd_pca, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors already; pass 0 for --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FitFailureError, IllConditionedError) as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except PdcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
