"""Experiment harness: declarative sweeps over (dt, T, method).

One trajectory is simulated per trial at the fine step sim_dt and reused
for every cell of the sweep by subsampling (for dt) and truncation (for
T), so method comparisons see identical data.  Trials are seeded
independently from (base_seed, trial index) and may run in parallel;
results do not depend on scheduling.
"""

from __future__ import annotations

import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import FAMILIES
from .dictionary import (
    Dictionary,
    build_design_set,
    monomial_dictionary,
    trig_monomial_dictionary,
    truncate_design,
)
from .estimators import (
    DIFF_DRIFT_SUB,
    DIFF_FD1,
    DIFF_FD2,
    DIFF_TRAP,
    DRIFT_FD1,
    DRIFT_FD2,
    DRIFT_TRAP,
    MethodSpec,
    diffusion_drift_sub,
    diffusion_fd1,
    diffusion_fd2,
    diffusion_trapezoidal,
    drift_fd1,
    drift_fd2,
    drift_trapezoidal,
)
from .metrics import (
    ErrorReport,
    TrialEnsemble,
    aggregate,
    true_diffusion_coefficients,
    true_drift_coefficients,
)
from .models import SdeModel, build_table_model, model_zoo
from .simulate import DivergenceError, euler_maruyama, subsample
from .sparse import SingularSystemError, solve_dense, stls

log = logging.getLogger("sdeident")

#: coarsest admissible sampling relative to the simulation step
MIN_DT_RATIO = 10

#: environment variable overriding base_seed when configs are loaded
SEED_ENV_VAR = "SINDY_SEED"

CONFIG_METHOD_KINDS = (
    DRIFT_FD1, DRIFT_FD2, DRIFT_TRAP,
    DIFF_FD1, DIFF_DRIFT_SUB, DIFF_FD2, DIFF_TRAP,
)

DEFAULT_DRIFT_SOURCES = {DIFF_DRIFT_SUB: DRIFT_FD1, DIFF_TRAP: DRIFT_TRAP}


class ConfigError(ValueError):
    """The experiment description is inconsistent or incomplete."""


@dataclass(frozen=True)
class DictionarySpec:
    family: str
    degree: int


@dataclass(frozen=True)
class InlineModelSpec:
    """Coefficient tables for a model defined directly in the config."""

    dim: int
    drift: tuple[tuple[tuple[str, float], ...], ...]  # per component
    sigma: tuple[tuple[tuple[int, int], tuple[tuple[str, float], ...]], ...]
    drift_family: str = "monomial"
    sigma_family: str = "monomial"


@dataclass(frozen=True)
class ExperimentConfig:
    model: str | InlineModelSpec
    drift_dictionary: DictionarySpec
    diffusion_dictionary: DictionarySpec
    sim_dt: float
    dt_values: tuple[float, ...]
    T_values: tuple[float, ...]
    trials: int
    base_seed: int
    methods: tuple[str, ...]
    solver: str = "stls"
    lambda_drift: float = 0.0
    lambda_diffusion: float = 0.0
    fixed_dt: float | None = None
    workers: int = 1
    drift_sources: tuple[tuple[str, str], ...] = ()


# ============================================================
# Validation and resolution
# ============================================================

def resolve_model(spec: str | InlineModelSpec) -> SdeModel:
    if isinstance(spec, str):
        try:
            return model_zoo(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    drift = [dict(component) for component in spec.drift]
    sigma = {(i, j): dict(entries) for (i, j), entries in spec.sigma}
    try:
        return build_table_model(
            spec.dim, drift, sigma,
            drift_family=spec.drift_family,
            sigma_family=spec.sigma_family,
            name="inline",
        )
    except ValueError as exc:
        raise ConfigError(f"bad inline model: {exc}") from exc


def build_dictionary(spec: DictionarySpec, dim: int) -> Dictionary:
    if spec.family == "monomial":
        return monomial_dictionary(dim, spec.degree)
    if spec.family == "trig":
        return trig_monomial_dictionary(dim, spec.degree)
    raise ConfigError(f"unknown dictionary family {spec.family!r}")


def _stride_for(dt: float, sim_dt: float) -> int:
    ratio = dt / sim_dt
    stride = round(ratio)
    if stride < 1 or abs(ratio - stride) > 1e-9 * max(ratio, 1.0):
        raise ConfigError(
            f"dt={dt} is not an integer multiple of sim_dt={sim_dt}"
        )
    return stride


def _drift_source_map(cfg: ExperimentConfig) -> dict[str, str]:
    sources = dict(DEFAULT_DRIFT_SOURCES)
    sources.update(dict(cfg.drift_sources))
    return sources


def _needed_drift_kinds(cfg: ExperimentConfig) -> list[str]:
    """Drift estimates required per cell: requested ones plus diffusion inputs."""
    sources = _drift_source_map(cfg)
    needed = []
    for kind in cfg.methods:
        if kind in (DRIFT_FD1, DRIFT_FD2, DRIFT_TRAP):
            dep = kind
        elif kind in (DIFF_DRIFT_SUB, DIFF_TRAP):
            dep = sources[kind]
        else:
            continue
        if dep not in needed:
            needed.append(dep)
    return needed


def _max_delay(cfg: ExperimentConfig) -> int:
    kinds = set(cfg.methods) | set(_needed_drift_kinds(cfg))
    return max(MethodSpec(kind=k).required_delay() for k in kinds)


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ConfigError on the first inconsistency found."""
    if cfg.sim_dt <= 0:
        raise ConfigError(f"sim_dt must be positive, got {cfg.sim_dt}")
    if not cfg.dt_values:
        raise ConfigError("dt_values must not be empty")
    if not cfg.T_values:
        raise ConfigError("T_values must not be empty")
    if list(cfg.dt_values) != sorted(set(cfg.dt_values)):
        raise ConfigError("dt_values must be strictly increasing and unique")
    if list(cfg.T_values) != sorted(set(cfg.T_values)):
        raise ConfigError("T_values must be strictly increasing and unique")
    for dt in cfg.dt_values:
        stride = _stride_for(dt, cfg.sim_dt)
        if stride < MIN_DT_RATIO:
            raise ConfigError(
                f"dt={dt} is only {stride} simulation steps; "
                f"need at least {MIN_DT_RATIO} per sample"
            )
    dt_max = max(cfg.dt_values)
    for T in cfg.T_values:
        if T <= 0:
            raise ConfigError(f"T values must be positive, got {T}")
        ratio = T / dt_max
        if abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0):
            raise ConfigError(
                f"T={T} is not an integer multiple of the largest dt={dt_max}"
            )
        for dt in cfg.dt_values:
            r = T / dt
            if abs(r - round(r)) > 1e-9 * max(r, 1.0):
                raise ConfigError(f"T={T} is not an integer multiple of dt={dt}")
    if cfg.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {cfg.trials}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    if cfg.solver not in ("dense", "stls"):
        raise ConfigError(f"solver must be 'dense' or 'stls', got {cfg.solver!r}")
    if cfg.lambda_drift < 0 or cfg.lambda_diffusion < 0:
        raise ConfigError("thresholds must be >= 0")
    if not cfg.methods:
        raise ConfigError("methods must not be empty")
    if len(set(cfg.methods)) != len(cfg.methods):
        raise ConfigError("methods must be unique")
    for kind in cfg.methods:
        if kind not in CONFIG_METHOD_KINDS:
            raise ConfigError(
                f"unknown method {kind!r}; choices: {CONFIG_METHOD_KINDS}"
            )
    for diff_kind, src in cfg.drift_sources:
        if diff_kind not in (DIFF_DRIFT_SUB, DIFF_TRAP):
            raise ConfigError(
                f"drift_sources key must be {DIFF_DRIFT_SUB} or {DIFF_TRAP}, "
                f"got {diff_kind!r}"
            )
        if src not in (DRIFT_FD1, DRIFT_FD2, DRIFT_TRAP):
            raise ConfigError(f"drift_sources value {src!r} is not a drift method")
    if cfg.fixed_dt is not None and cfg.fixed_dt not in cfg.dt_values:
        raise ConfigError(
            f"fixed_dt={cfg.fixed_dt} is not one of dt_values {cfg.dt_values}"
        )
    if cfg.drift_dictionary.family not in FAMILIES:
        raise ConfigError(f"unknown dictionary family {cfg.drift_dictionary.family!r}")
    if cfg.diffusion_dictionary.family not in FAMILIES:
        raise ConfigError(
            f"unknown dictionary family {cfg.diffusion_dictionary.family!r}"
        )
    if cfg.drift_dictionary.degree < 0 or cfg.diffusion_dictionary.degree < 0:
        raise ConfigError("dictionary degree must be >= 0")
    # fail fast when the model itself is broken
    resolve_model(cfg.model)


# ============================================================
# Per-trial work
# ============================================================

def _trial_path_seed(base_seed: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(trial, 1))
    return int(ss.generate_state(1, np.uint64)[0])


def _trial_x0(base_seed: int, trial: int, dim: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(trial, 0))
    return np.random.default_rng(ss).standard_normal(dim)


def _solve_columns(system, solver: str, lam: float) -> np.ndarray:
    k, m = system.B.shape
    out = np.empty((k, m))
    for t in range(m):
        if solver == "dense":
            out[:, t] = solve_dense(system, t)
        else:
            out[:, t] = stls(system, t, lam).coeffs
    return out


_DRIFT_ASSEMBLERS = {
    DRIFT_FD1: drift_fd1,
    DRIFT_FD2: drift_fd2,
    DRIFT_TRAP: drift_trapezoidal,
}


def run_trial(cfg: ExperimentConfig, trial: int) -> dict:
    """All cell estimates for one trial; None marks a failed solve.

    Returns {"cells": {(method, dt, T): matrix | None}, "diverged": bool}.
    Depends only on (cfg, trial), never on other trials.
    """
    model = resolve_model(cfg.model)
    dict_drift = build_dictionary(cfg.drift_dictionary, model.dim)
    dict_diff = build_dictionary(cfg.diffusion_dictionary, model.dim)
    same_dict = (
        cfg.drift_dictionary == cfg.diffusion_dictionary
    )
    sources = _drift_source_map(cfg)
    needed_drift = _needed_drift_kinds(cfg)
    max_delay = _max_delay(cfg)
    max_T = max(cfg.T_values)
    strides = {dt: _stride_for(dt, cfg.sim_dt) for dt in cfg.dt_values}
    n_steps = round(max_T / cfg.sim_dt) + max_delay * max(strides.values())

    cells: dict[tuple, np.ndarray | None] = {}

    def fail_all():
        for kind in cfg.methods:
            for dt in cfg.dt_values:
                for T in cfg.T_values:
                    cells[(kind, dt, T)] = None
        return {"cells": cells, "diverged": True}

    x0 = _trial_x0(cfg.base_seed, trial, model.dim)
    seed = _trial_path_seed(cfg.base_seed, trial)
    try:
        traj = euler_maruyama(model, x0, cfg.sim_dt, n_steps, seed)
    except DivergenceError as exc:
        log.warning("trial %d diverged during simulation: %s", trial, exc)
        return fail_all()

    for dt in cfg.dt_values:
        sub = subsample(traj, strides[dt])
        ds_drift_full = build_design_set(dict_drift, sub, max_delay)
        ds_diff_full = (
            ds_drift_full if same_dict
            else build_design_set(dict_diff, sub, max_delay)
        )
        for T in cfg.T_values:
            rows = round(T / dt)
            dsD = truncate_design(ds_drift_full, rows)
            dsS = dsD if same_dict else truncate_design(ds_diff_full, rows)
            alphas: dict[str, np.ndarray | None] = {}
            for kind in needed_drift:
                system = _DRIFT_ASSEMBLERS[kind](dsD)
                try:
                    alphas[kind] = _solve_columns(
                        system, cfg.solver, cfg.lambda_drift
                    )
                except SingularSystemError as exc:
                    log.warning(
                        "trial %d dt=%g T=%g %s: %s", trial, dt, T, kind, exc
                    )
                    alphas[kind] = None
            for kind in cfg.methods:
                key = (kind, dt, T)
                try:
                    if kind in _DRIFT_ASSEMBLERS:
                        cells[key] = alphas[kind]
                        continue
                    if kind == DIFF_FD1:
                        system = diffusion_fd1(dsS)
                    elif kind == DIFF_FD2:
                        system = diffusion_fd2(dsS)
                    else:
                        alpha = alphas[sources[kind]]
                        if alpha is None:
                            cells[key] = None
                            continue
                        drift_design = None if same_dict else dsD
                        if kind == DIFF_DRIFT_SUB:
                            system = diffusion_drift_sub(
                                dsS, alpha, drift_design=drift_design
                            )
                        else:
                            system = diffusion_trapezoidal(
                                dsS, alpha, drift_design=drift_design
                            )
                    cells[key] = _solve_columns(
                        system, cfg.solver, cfg.lambda_diffusion
                    )
                except SingularSystemError as exc:
                    log.warning(
                        "trial %d dt=%g T=%g %s: %s", trial, dt, T, kind, exc
                    )
                    cells[key] = None
    return {"cells": cells, "diverged": False}


def _trial_worker(args):
    cfg, trial = args
    return trial, run_trial(cfg, trial)


# ============================================================
# Sweep driver
# ============================================================

def collect_trials(cfg: ExperimentConfig) -> dict[tuple, list[np.ndarray]]:
    """Run all trials; {(method, dt, T): [estimates in trial order]}."""
    validate_config(cfg)
    results = {}
    if cfg.workers == 1:
        for trial in range(cfg.trials):
            results[trial] = run_trial(cfg, trial)
            if (trial + 1) % 10 == 0 or trial + 1 == cfg.trials:
                log.info("finished trial %d/%d", trial + 1, cfg.trials)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for trial, res in pool.map(
                _trial_worker, ((cfg, t) for t in range(cfg.trials))
            ):
                results[trial] = res
                log.info("finished trial %d/%d", trial + 1, cfg.trials)
    collected: dict[tuple, list[np.ndarray]] = {
        (kind, dt, T): []
        for kind in cfg.methods
        for dt in cfg.dt_values
        for T in cfg.T_values
    }
    for trial in sorted(results):
        for key, est in results[trial]["cells"].items():
            if est is not None:
                collected[key].append(est)
    return collected


def run_experiment(cfg: ExperimentConfig) -> list[ErrorReport]:
    """Full sweep: simulate, estimate, aggregate; one report per cell.

    Reports are ordered by (method as configured, dt ascending, T
    ascending).  Cells whose every trial failed are reported with nan
    errors rather than dropped.
    """
    collected = collect_trials(cfg)
    model = resolve_model(cfg.model)
    dict_drift = build_dictionary(cfg.drift_dictionary, model.dim)
    dict_diff = build_dictionary(cfg.diffusion_dictionary, model.dim)
    truths: dict[str, np.ndarray] = {}
    targets = {kind: MethodSpec(kind=kind).target for kind in cfg.methods}
    if "drift" in targets.values():
        truths["drift"] = true_drift_coefficients(model, dict_drift)
    if "diffusion" in targets.values():
        truths["diffusion"] = true_diffusion_coefficients(model, dict_diff)
    for target, truth in truths.items():
        if not np.any(truth):
            raise ConfigError(
                f"true {target} coefficients are identically zero; "
                "relative errors are undefined"
            )
    reports = []
    for kind in cfg.methods:
        target = targets[kind]
        for dt in cfg.dt_values:
            for T in cfg.T_values:
                estimates = collected[(kind, dt, T)]
                diverged = cfg.trials - len(estimates)
                if estimates:
                    ens = TrialEnsemble(
                        estimates=tuple(estimates),
                        truth=truths[target],
                        method=kind,
                        dt=dt,
                        T=T,
                        diverged=diverged,
                    )
                    reports.append(aggregate(ens, target=target))
                else:
                    reports.append(ErrorReport(
                        method=kind, target=target, dt=dt, T=T,
                        trials=0, diverged=diverged,
                        err_mean=float("nan"), err_var=float("nan"),
                    ))
    return reports


# ============================================================
# Output files
# ============================================================

CSV_HEADER = "method,target,dt,T,trials,diverged,err_mean,err_var"


def _fmt(v: float) -> str:
    return repr(float(v))


def emit_csv(reports: list[ErrorReport], path) -> Path:
    """Write one row per report; floats in shortest round-trip form."""
    path = Path(path)
    lines = [CSV_HEADER]
    for r in reports:
        lines.append(
            f"{r.method},{r.target},{_fmt(r.dt)},{_fmt(r.T)},"
            f"{r.trials},{r.diverged},{_fmt(r.err_mean)},{_fmt(r.err_var)}"
        )
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_plot_data(
    reports: list[ErrorReport], out_dir, fixed_dt: float | None = None
) -> tuple[list[Path], list[tuple[str, str]]]:
    """Tab-separated series files per target, mirroring the sweep panels.

    Writes err_mean vs dt and err_var vs dt at the largest T, and err_var
    vs T at fixed_dt (default: smallest dt).  Panels whose axis has fewer
    than two values are skipped with a reason; if nothing can be written
    at all, raises ValueError.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_target: dict[str, list[ErrorReport]] = {}
    for r in reports:
        by_target.setdefault(r.target, []).append(r)
    written: list[Path] = []
    skipped: list[tuple[str, str]] = []

    for target, rs in by_target.items():
        methods = list(dict.fromkeys(r.method for r in rs))
        dts = sorted({r.dt for r in rs})
        Ts = sorted({r.T for r in rs})
        cell = {(r.method, r.dt, r.T): r for r in rs}

        def series_file(name, xs, key, value):
            path = out_dir / f"{target}_{name}.tsv"
            header = "\t".join([name.split("_vs_")[1]] + methods)
            lines = [header]
            for x in xs:
                vals = []
                for m in methods:
                    r = cell.get(key(m, x))
                    vals.append(_fmt(getattr(r, value)) if r else "nan")
                lines.append("\t".join([_fmt(x)] + vals))
            path.write_text("\n".join(lines) + "\n")
            written.append(path)

        T_big = Ts[-1]
        if len(dts) >= 2:
            series_file("err_mean_vs_dt", dts, lambda m, x: (m, x, T_big), "err_mean")
            series_file("err_var_vs_dt", dts, lambda m, x: (m, x, T_big), "err_var")
        else:
            reason = f"only {len(dts)} dt value(s); need at least 2 on the dt axis"
            skipped.append((f"{target}_err_mean_vs_dt.tsv", reason))
            skipped.append((f"{target}_err_var_vs_dt.tsv", reason))
        if len(Ts) >= 2:
            dt_fix = fixed_dt if fixed_dt is not None else dts[0]
            if dt_fix not in dts:
                raise ValueError(f"fixed_dt={dt_fix} not in swept dt values {dts}")
            series_file("err_var_vs_T", Ts, lambda m, x: (m, dt_fix, x), "err_var")
        else:
            skipped.append((
                f"{target}_err_var_vs_T.tsv",
                f"only {len(Ts)} T value(s); need at least 2 on the T axis",
            ))
    for name, reason in skipped:
        log.warning("skipping %s: %s", name, reason)
    if not written:
        raise ValueError(
            "insufficient sweep coverage for plot data: "
            + "; ".join(f"{n}: {r}" for n, r in skipped)
        )
    return written, skipped


# ============================================================
# Config file loading
# ============================================================

def _load_toml(path: Path) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _parse_inline_model(tbl: dict) -> InlineModelSpec:
    try:
        dim = int(tbl["dim"])
        drift_tbl = tbl["drift"]
        sigma_tbl = tbl["sigma"]
    except KeyError as exc:
        raise ConfigError(f"inline model is missing {exc.args[0]!r}") from None
    drift = []
    for i in range(dim):
        key = f"x{i + 1}"
        entries = drift_tbl.get(key, {})
        drift.append(tuple((str(lbl), float(c)) for lbl, c in entries.items()))
    sigma = []
    for key, entries in sigma_tbl.items():
        try:
            i, j = (int(p) for p in key.split(","))
        except ValueError:
            raise ConfigError(
                f"sigma entry key {key!r} must look like 'i,j' (1-based)"
            ) from None
        sigma.append((
            (i - 1, j - 1),
            tuple((str(lbl), float(c)) for lbl, c in entries.items()),
        ))
    return InlineModelSpec(
        dim=dim,
        drift=tuple(drift),
        sigma=tuple(sigma),
        drift_family=tbl.get("drift_family", "monomial"),
        sigma_family=tbl.get("sigma_family", "monomial"),
    )


def load_config(path, env: dict | None = None) -> ExperimentConfig:
    """Read a TOML experiment description; SINDY_SEED overrides base_seed."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = _load_toml(path)
    except Exception as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    env = os.environ if env is None else env

    def section(name):
        if name not in raw:
            raise ConfigError(f"config is missing the [{name}] section")
        return raw[name]

    model_tbl = section("model")
    if "name" in model_tbl:
        model: str | InlineModelSpec = str(model_tbl["name"])
    elif "inline" in model_tbl:
        model = _parse_inline_model(model_tbl["inline"])
    else:
        raise ConfigError("[model] needs either name = ... or an [model.inline] table")

    dict_tbl = section("dictionary")
    specs = {}
    for which in ("drift", "diffusion"):
        if which not in dict_tbl:
            raise ConfigError(f"config is missing the [dictionary.{which}] section")
        sub = dict_tbl[which]
        try:
            specs[which] = DictionarySpec(
                family=str(sub["family"]), degree=int(sub["degree"])
            )
        except KeyError as exc:
            raise ConfigError(
                f"[dictionary.{which}] is missing {exc.args[0]!r}"
            ) from None

    sim = section("simulation")
    sweep = section("sweep")
    est = section("estimation")
    try:
        base_seed = int(sim["base_seed"])
        if env.get(SEED_ENV_VAR):
            base_seed = int(env[SEED_ENV_VAR])
            log.info("base_seed overridden to %d via %s", base_seed, SEED_ENV_VAR)
        cfg = ExperimentConfig(
            model=model,
            drift_dictionary=specs["drift"],
            diffusion_dictionary=specs["diffusion"],
            sim_dt=float(sim["sim_dt"]),
            dt_values=tuple(float(v) for v in sweep["dt_values"]),
            T_values=tuple(float(v) for v in sweep["T_values"]),
            trials=int(sim["trials"]),
            base_seed=base_seed,
            methods=tuple(str(m) for m in est["methods"]),
            solver=str(est.get("solver", "stls")),
            lambda_drift=float(est.get("lambda_drift", 0.0)),
            lambda_diffusion=float(est.get("lambda_diffusion", 0.0)),
            fixed_dt=(
                float(sweep["fixed_dt"]) if "fixed_dt" in sweep else None
            ),
            workers=int(est.get("workers", 1)),
            drift_sources=tuple(
                (str(k), str(v))
                for k, v in est.get("drift_sources", {}).items()
            ),
        )
    except KeyError as exc:
        raise ConfigError(f"config is missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in config: {exc}") from exc
    validate_config(cfg)
    return cfg
