"""Command-line entry points.

Diagnostics go to stderr; data goes to files (run) or stdout (zoo,
truth, order).  Exit codes: 0 success, 1 runtime failure, 2 bad usage
or config.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import backend
from .dictionary import monomial_dictionary, trig_monomial_dictionary
from .harness import (
    ConfigError,
    emit_csv,
    emit_plot_data,
    load_config,
    run_experiment,
)
from .metrics import (
    NotRepresentableError,
    fit_order,
    true_diffusion_coefficients,
    true_drift_coefficients,
)
from .models import ZOO_NAMES, model_zoo

log = logging.getLogger("sdeident")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdeident",
        description="Identify drift and diffusion of stochastic systems "
        "from sampled trajectories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep described by a TOML config")
    p_run.add_argument("config", help="path to the experiment config")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument(
        "--workers", type=int, default=None,
        help="override the number of worker processes",
    )

    sub.add_parser("zoo", help="list built-in models")

    p_truth = sub.add_parser(
        "truth", help="print a model's true coefficients in a dictionary"
    )
    p_truth.add_argument("model", help="built-in model name")
    p_truth.add_argument(
        "dictionary", help="dictionary spec, e.g. monomial:3 or trig:4"
    )

    p_order = sub.add_parser(
        "order", help="fit convergence orders from a results CSV"
    )
    p_order.add_argument("csv", help="results file written by 'run'")
    return parser


def _parse_dict_spec(text: str, dim: int):
    try:
        family, degree_s = text.split(":")
        degree = int(degree_s)
    except ValueError:
        raise ConfigError(
            f"dictionary spec {text!r} must look like family:degree"
        ) from None
    if family == "monomial":
        return monomial_dictionary(dim, degree)
    if family == "trig":
        return trig_monomial_dictionary(dim, degree)
    raise ConfigError(f"unknown dictionary family {family!r}")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.workers is not None:
        from dataclasses import replace

        cfg = replace(cfg, workers=args.workers)
        from .harness import validate_config

        validate_config(cfg)
    log.info("backend: %s", backend.ACTIVE_NAME)
    log.info(
        "sweep: %d method(s) x %d dt x %d T, %d trial(s), %d worker(s)",
        len(cfg.methods), len(cfg.dt_values), len(cfg.T_values),
        cfg.trials, cfg.workers,
    )
    reports = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = emit_csv(reports, out / "results.csv")
    log.info("wrote %s (%d rows)", csv_path, len(reports))
    written, skipped = emit_plot_data(reports, out, fixed_dt=cfg.fixed_dt)
    for path in written:
        log.info("wrote %s", path)
    return 0


def _coeff_lines(labels, matrix, col_names):
    width = max(len(l) for l in labels)
    yield "  ".join([" " * width] + [f"{c:>12s}" for c in col_names])
    for label, row in zip(labels, matrix):
        cells = [f"{v:12.6g}" if v else f"{'.':>12s}" for v in row]
        yield "  ".join([label.ljust(width)] + cells)


def _cmd_zoo(args) -> int:
    for name in ZOO_NAMES:
        model = model_zoo(name)
        comps = []
        if model.drift_table is not None:
            nz = int(np.count_nonzero(model.drift_table.coeffs))
            comps.append(f"{nz} drift term(s), {model.drift_table.basis.family}")
        if model.sigma_table is not None:
            nz = int(np.count_nonzero(model.sigma_table.coeffs))
            comps.append(f"{nz} noise term(s), {model.sigma_table.basis.family}")
        print(f"{name}: dim={model.dim}; " + "; ".join(comps))
    return 0


def _cmd_truth(args) -> int:
    try:
        model = model_zoo(args.model)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    dictionary = _parse_dict_spec(args.dictionary, model.dim)
    labels = dictionary.labels
    dim = model.dim
    print(f"# {args.model}: true coefficients in {args.dictionary} "
          f"({dictionary.size} terms)")
    printed = 0
    print("# drift")
    try:
        alpha = true_drift_coefficients(model, dictionary)
    except NotRepresentableError as exc:
        print(f"# not representable here: {exc}")
    else:
        printed += 1
        for line in _coeff_lines(
            labels, alpha, [f"mu_{i+1}" for i in range(dim)]
        ):
            print(line)
    print("# diffusion (0.5 * sigma sigma^T, lower triangle)")
    try:
        beta = true_diffusion_coefficients(model, dictionary)
    except NotRepresentableError as exc:
        print(f"# not representable here: {exc}")
    else:
        printed += 1
        pair_names = [
            f"Sigma_{i+1}{j+1}" for i in range(dim) for j in range(i + 1)
        ]
        for line in _coeff_lines(labels, beta, pair_names):
            print(line)
    if not printed:
        raise ConfigError(
            f"neither drift nor diffusion of {args.model} is representable "
            f"in {args.dictionary}"
        )
    return 0


def _cmd_order(args) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise ConfigError(f"results file {path} does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    required = {"method", "target", "dt", "T", "err_mean", "err_var"}
    if not rows or not required.issubset(rows[0].keys()):
        raise ConfigError(f"{path} does not look like a results CSV")
    by_method: dict[tuple, list[dict]] = {}
    for row in rows:
        by_method.setdefault((row["method"], row["target"]), []).append(row)
    for (method, target), rs in by_method.items():
        dts = sorted({float(r["dt"]) for r in rs})
        Ts = sorted({float(r["T"]) for r in rs})
        parts = []
        try:
            points = [
                (float(r["dt"]), float(r["err_mean"]))
                for r in rs
                if float(r["T"]) == Ts[-1]
            ]
            parts.append(f"order_mean_vs_dt={fit_order(points):.3f}")
        except ValueError:
            parts.append("order_mean_vs_dt=n/a")
        try:
            points = [
                (float(r["T"]), float(r["err_var"]))
                for r in rs
                if float(r["dt"]) == dts[0]
            ]
            parts.append(f"order_var_vs_T={fit_order(points):.3f}")
        except ValueError:
            parts.append("order_var_vs_T=n/a")
        print(f"{method} ({target}): " + " ".join(parts))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "zoo": _cmd_zoo,
    "truth": _cmd_truth,
    "order": _cmd_order,
}


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, NotRepresentableError) as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # runtime failures: simulation, solver, IO
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
