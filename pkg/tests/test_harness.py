import dataclasses
import math

import numpy as np
import pytest

from sdeident.dictionary import build_design_set, monomial_dictionary, \
    truncate_design
from sdeident.estimators import drift_fd1, drift_trapezoidal
from sdeident.harness import (
    ConfigError,
    DictionarySpec,
    ExperimentConfig,
    InlineModelSpec,
    MIN_DT_RATIO,
    SEED_ENV_VAR,
    _trial_path_seed,
    _trial_x0,
    build_dictionary,
    collect_trials,
    emit_csv,
    emit_plot_data,
    load_config,
    resolve_model,
    run_experiment,
    run_trial,
    validate_config,
)
from sdeident.metrics import ErrorReport
from sdeident.simulate import euler_maruyama, subsample
from sdeident.sparse import solve_dense

OU = InlineModelSpec(
    dim=1,
    drift=((("x1", -1.0),),),
    sigma=(((0, 0), (("1", 1.0),)),),
)


def base_config(**over):
    defaults = dict(
        model=OU,
        drift_dictionary=DictionarySpec("monomial", 2),
        diffusion_dictionary=DictionarySpec("monomial", 2),
        sim_dt=0.001,
        dt_values=(0.01, 0.02),
        T_values=(2.0, 4.0),
        trials=2,
        base_seed=11,
        methods=("drift_fd1", "diff_drift_sub"),
        solver="dense",
    )
    defaults.update(over)
    return ExperimentConfig(**defaults)


def test_valid_config_passes():
    validate_config(base_config())


@pytest.mark.parametrize(
    "over",
    [
        dict(sim_dt=0.0),
        dict(dt_values=()),
        dict(T_values=()),
        dict(dt_values=(0.02, 0.01)),
        dict(dt_values=(0.01, 0.01)),
        dict(T_values=(4.0, 2.0)),
        dict(dt_values=(0.015,)),  # 15 sim steps but 2.0/0.015 not integer
        dict(dt_values=(0.003,)),  # only 3 sim steps per sample
        dict(T_values=(0.03,)),  # not a multiple of dt=0.02
        dict(T_values=(-1.0,)),
        dict(trials=0),
        dict(workers=0),
        dict(solver="qr"),
        dict(lambda_drift=-0.1),
        dict(lambda_diffusion=-0.1),
        dict(methods=()),
        dict(methods=("drift_fd1", "drift_fd1")),
        dict(methods=("drift_general",)),
        dict(methods=("newton",)),
        dict(drift_sources=(("drift_fd1", "drift_fd2"),)),
        dict(drift_sources=(("diff_drift_sub", "diff_fd1"),)),
        dict(fixed_dt=0.04),
        dict(drift_dictionary=DictionarySpec("fourier", 2)),
        dict(diffusion_dictionary=DictionarySpec("monomial", -1)),
        dict(model="pendulum"),
    ],
)
def test_invalid_configs_rejected(over):
    with pytest.raises(ConfigError):
        validate_config(base_config(**over))


def test_min_dt_ratio_boundary():
    validate_config(base_config(dt_values=(0.001 * MIN_DT_RATIO,)))
    with pytest.raises(ConfigError):
        validate_config(
            base_config(dt_values=(0.001 * (MIN_DT_RATIO - 1),), T_values=(2.007,))
        )


def test_resolve_model_inline_and_zoo():
    m = resolve_model(OU)
    assert m.dim == 1 and m.name == "inline"
    np.testing.assert_allclose(m.drift(np.array([2.0])), [-2.0])
    assert resolve_model("double_well").name == "double_well"
    bad = InlineModelSpec(
        dim=1, drift=((("y1", 1.0),),), sigma=(((0, 0), (("1", 1.0),)),)
    )
    with pytest.raises(ConfigError):
        resolve_model(bad)


def test_build_dictionary():
    d = build_dictionary(DictionarySpec("trig", 3), 2)
    assert d.family == "trig" and d.size == math.comb(2 + 3, 3)
    with pytest.raises(ConfigError):
        build_dictionary(DictionarySpec("wavelet", 3), 2)


def test_trial_seeding_deterministic_and_distinct():
    xs = [_trial_x0(7, t, 3) for t in range(5)]
    again = [_trial_x0(7, t, 3) for t in range(5)]
    for a, b in zip(xs, again):
        np.testing.assert_array_equal(a, b)
    flat = np.array([x[0] for x in xs])
    assert len(np.unique(flat)) == 5

    seeds = [_trial_path_seed(7, t) for t in range(50)]
    assert seeds == [_trial_path_seed(7, t) for t in range(50)]
    assert len(set(seeds)) == 50
    assert seeds != [_trial_path_seed(8, t) for t in range(50)]


def test_run_trial_grid_and_shapes():
    cfg = base_config()
    out = run_trial(cfg, 0)
    assert out["diverged"] is False
    cells = out["cells"]
    assert set(cells) == {
        (m, dt, T)
        for m in cfg.methods
        for dt in cfg.dt_values
        for T in cfg.T_values
    }
    k = build_dictionary(cfg.drift_dictionary, 1).size
    assert cells[("drift_fd1", 0.01, 2.0)].shape == (k, 1)
    assert cells[("diff_drift_sub", 0.02, 4.0)].shape == (k, 1)


def test_run_trial_deterministic():
    cfg = base_config()
    a = run_trial(cfg, 1)["cells"]
    b = run_trial(cfg, 1)["cells"]
    for key in a:
        np.testing.assert_array_equal(a[key], b[key])


def test_run_trial_matches_manual_pipeline():
    """Rebuild one cell by hand with the public pieces: same trajectory
    seeding, subsample for dt, truncate for T, assemble, solve."""
    cfg = base_config()
    cells = run_trial(cfg, 0)["cells"]

    model = resolve_model(cfg.model)
    d = build_dictionary(cfg.drift_dictionary, model.dim)
    max_stride = round(max(cfg.dt_values) / cfg.sim_dt)
    n_steps = round(max(cfg.T_values) / cfg.sim_dt) + 1 * max_stride
    traj = euler_maruyama(
        model,
        _trial_x0(cfg.base_seed, 0, model.dim),
        cfg.sim_dt,
        n_steps,
        _trial_path_seed(cfg.base_seed, 0),
    )
    for dt, T in [(0.01, 2.0), (0.02, 4.0)]:
        sub = subsample(traj, round(dt / cfg.sim_dt))
        ds = truncate_design(build_design_set(d, sub, 1), round(T / dt))
        sys = drift_fd1(ds)
        want = solve_dense(sys, 0)
        np.testing.assert_array_equal(
            cells[("drift_fd1", dt, T)][:, 0], want
        )


def test_run_trial_divergence_marks_every_cell():
    runaway = InlineModelSpec(
        dim=1,
        drift=((("x1", 100.0),),),
        sigma=(((0, 0), (("1", 1.0),)),),
    )
    cfg = base_config(
        model=runaway, sim_dt=0.1, dt_values=(1.0,), T_values=(10.0,),
        methods=("drift_fd1",),
    )
    out = run_trial(cfg, 0)
    assert out["diverged"] is True
    assert all(v is None for v in out["cells"].values())


def test_run_trial_singular_cell_is_none_not_fatal():
    """Fewer rows than dictionary terms makes that cell's system singular;
    only that cell fails."""
    cfg = base_config(
        drift_dictionary=DictionarySpec("monomial", 6),
        diffusion_dictionary=DictionarySpec("monomial", 6),
        sim_dt=0.001,
        dt_values=(0.01,),
        T_values=(0.05, 2.0),
        methods=("drift_fd1",),
    )
    out = run_trial(cfg, 0)
    assert out["diverged"] is False
    assert out["cells"][("drift_fd1", 0.01, 0.05)] is None
    assert out["cells"][("drift_fd1", 0.01, 2.0)] is not None


def test_collect_trials_worker_parity():
    cfg = base_config(trials=3, T_values=(2.0,), dt_values=(0.01,))
    seq = collect_trials(cfg)
    par = collect_trials(dataclasses.replace(cfg, workers=2))
    assert set(seq) == set(par)
    for key in seq:
        assert len(seq[key]) == len(par[key]) == 3
        for a, b in zip(seq[key], par[key]):
            np.testing.assert_array_equal(a, b)


def test_run_experiment_report_order_and_content():
    cfg = base_config()
    reports = run_experiment(cfg)
    keys = [(r.method, r.dt, r.T) for r in reports]
    assert keys == [
        (m, dt, T)
        for m in cfg.methods
        for dt in cfg.dt_values
        for T in cfg.T_values
    ]
    for r in reports:
        assert r.trials == cfg.trials
        assert r.diverged == 0
        assert np.isfinite(r.err_mean) and np.isfinite(r.err_var)
        assert r.err_mean > 0 and r.err_var >= 0
        assert r.target == ("drift" if r.method.startswith("drift") else "diffusion")


def test_run_experiment_all_diverged_reports_nan():
    runaway = InlineModelSpec(
        dim=1,
        drift=((("x1", 100.0),),),
        sigma=(((0, 0), (("1", 1.0),)),),
    )
    cfg = base_config(
        model=runaway, sim_dt=0.1, dt_values=(1.0,), T_values=(10.0,),
        methods=("drift_fd1",), trials=2,
    )
    (rep,) = run_experiment(cfg)
    assert rep.trials == 0
    assert rep.diverged == 2
    assert math.isnan(rep.err_mean) and math.isnan(rep.err_var)


def test_run_experiment_rejects_zero_truth():
    pure_noise = InlineModelSpec(
        dim=1,
        drift=((),),
        sigma=(((0, 0), (("1", 1.0),)),),
    )
    cfg = base_config(model=pure_noise, methods=("drift_fd1",))
    with pytest.raises(ConfigError, match="identically zero"):
        run_experiment(cfg)


def test_custom_drift_source_changes_diffusion_input():
    cfg = base_config(methods=("drift_trap", "diff_drift_sub"))
    cfg_trap = dataclasses.replace(
        cfg, drift_sources=(("diff_drift_sub", "drift_trap"),)
    )
    a = run_trial(cfg, 0)["cells"][("diff_drift_sub", 0.01, 2.0)]
    b = run_trial(cfg_trap, 0)["cells"][("diff_drift_sub", 0.01, 2.0)]
    assert np.max(np.abs(a - b)) > 0  # different drift fit was subtracted


# ------------------------------------------------------------------
# Emitters (exercised on synthetic reports: exact, no simulation)
# ------------------------------------------------------------------


def _report(method, dt, T, em, ev, target="drift"):
    return ErrorReport(
        method=method, target=target, dt=dt, T=T,
        trials=4, diverged=0, err_mean=em, err_var=ev,
    )


def _grid_reports():
    out = []
    for m in ("drift_fd1", "drift_fd2"):
        for dt in (0.1, 0.2):
            for T in (1.0, 2.0):
                tag = 1.0 if m == "drift_fd1" else 2.0
                out.append(_report(m, dt, T, tag * dt + T, tag * dt * T))
    return out


def test_emit_csv_round_trip(tmp_path):
    reports = _grid_reports()
    path = emit_csv(reports, tmp_path / "results.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "method,target,dt,T,trials,diverged,err_mean,err_var"
    assert len(lines) == 1 + len(reports)
    first = lines[1].split(",")
    assert first[0] == "drift_fd1" and first[1] == "drift"
    assert float(first[2]) == 0.1 and float(first[3]) == 1.0
    assert int(first[4]) == 4 and int(first[5]) == 0
    assert float(first[6]) == reports[0].err_mean
    assert float(first[7]) == reports[0].err_var
    assert path.read_text().endswith("\n")


def test_emit_plot_data_panels(tmp_path):
    written, skipped = emit_plot_data(_grid_reports(), tmp_path)
    names = sorted(p.name for p in written)
    assert names == [
        "drift_err_mean_vs_dt.tsv",
        "drift_err_var_vs_T.tsv",
        "drift_err_var_vs_dt.tsv",
    ]
    assert skipped == []
    mean_dt = (tmp_path / "drift_err_mean_vs_dt.tsv").read_text().splitlines()
    assert mean_dt[0] == "dt\tdrift_fd1\tdrift_fd2"
    row = mean_dt[1].split("\t")  # dt=0.1 at the largest T=2.0
    assert float(row[0]) == 0.1
    assert float(row[1]) == pytest.approx(1.0 * 0.1 + 2.0)
    assert float(row[2]) == pytest.approx(2.0 * 0.1 + 2.0)
    var_T = (tmp_path / "drift_err_var_vs_T.tsv").read_text().splitlines()
    assert var_T[0] == "T\tdrift_fd1\tdrift_fd2"
    row = var_T[2].split("\t")  # T=2.0 at default fixed dt = smallest = 0.1
    assert float(row[0]) == 2.0
    assert float(row[1]) == pytest.approx(1.0 * 0.1 * 2.0)


def test_emit_plot_data_respects_fixed_dt(tmp_path):
    emit_plot_data(_grid_reports(), tmp_path, fixed_dt=0.2)
    var_T = (tmp_path / "drift_err_var_vs_T.tsv").read_text().splitlines()
    row = var_T[1].split("\t")
    assert float(row[1]) == pytest.approx(1.0 * 0.2 * 1.0)
    with pytest.raises(ValueError):
        emit_plot_data(_grid_reports(), tmp_path, fixed_dt=0.3)


def test_emit_plot_data_skips_thin_axes(tmp_path):
    only_dt1 = [r for r in _grid_reports() if r.dt == 0.1]
    written, skipped = emit_plot_data(only_dt1, tmp_path)
    assert [p.name for p in written] == ["drift_err_var_vs_T.tsv"]
    assert {n for n, _ in skipped} == {
        "drift_err_mean_vs_dt.tsv", "drift_err_var_vs_dt.tsv"
    }
    single = [r for r in _grid_reports() if r.dt == 0.1 and r.T == 1.0]
    with pytest.raises(ValueError, match="insufficient sweep coverage"):
        emit_plot_data(single, tmp_path / "other")


def test_emit_plot_data_nan_for_missing_cell(tmp_path):
    reports = [r for r in _grid_reports() if not (r.method == "drift_fd2" and r.dt == 0.2)]
    emit_plot_data(reports, tmp_path)
    mean_dt = (tmp_path / "drift_err_mean_vs_dt.tsv").read_text().splitlines()
    assert mean_dt[2].split("\t")[2] == "nan"


def test_emit_plot_data_separates_targets(tmp_path):
    reports = _grid_reports() + [
        _report("diff_fd1", dt, T, dt + T, dt * T, target="diffusion")
        for dt in (0.1, 0.2)
        for T in (1.0, 2.0)
    ]
    written, _ = emit_plot_data(reports, tmp_path)
    names = {p.name for p in written}
    assert "diffusion_err_mean_vs_dt.tsv" in names
    diff = (tmp_path / "diffusion_err_var_vs_T.tsv").read_text().splitlines()
    assert diff[0] == "T\tdiff_fd1"


# ------------------------------------------------------------------
# Config file loading
# ------------------------------------------------------------------


GOOD_TOML = """
[model]
name = "double_well"

[dictionary.drift]
family = "monomial"
degree = 5

[dictionary.diffusion]
family = "monomial"
degree = 5

[simulation]
sim_dt = 1e-3
trials = 4
base_seed = 99

[sweep]
dt_values = [0.01, 0.02]
T_values = [2.0, 4.0]
fixed_dt = 0.02

[estimation]
methods = ["drift_fd1", "diff_trap"]
solver = "stls"
lambda_drift = 0.05
lambda_diffusion = 0.02
workers = 2

[estimation.drift_sources]
diff_trap = "drift_fd1"
"""


def test_load_config_full(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(GOOD_TOML)
    cfg = load_config(path, env={})
    assert cfg.model == "double_well"
    assert cfg.drift_dictionary == DictionarySpec("monomial", 5)
    assert cfg.sim_dt == 1e-3
    assert cfg.dt_values == (0.01, 0.02)
    assert cfg.T_values == (2.0, 4.0)
    assert cfg.fixed_dt == 0.02
    assert cfg.trials == 4
    assert cfg.base_seed == 99
    assert cfg.methods == ("drift_fd1", "diff_trap")
    assert cfg.solver == "stls"
    assert cfg.lambda_drift == 0.05
    assert cfg.lambda_diffusion == 0.02
    assert cfg.workers == 2
    assert cfg.drift_sources == (("diff_trap", "drift_fd1"),)


def test_load_config_seed_env_override(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(GOOD_TOML)
    cfg = load_config(path, env={SEED_ENV_VAR: "1234"})
    assert cfg.base_seed == 1234
    assert load_config(path, env={SEED_ENV_VAR: ""}).base_seed == 99


def test_load_config_defaults(tmp_path):
    text = GOOD_TOML
    for cut in ("solver", "lambda_drift", "lambda_diffusion", "workers"):
        text = "\n".join(
            l for l in text.splitlines() if not l.startswith(cut)
        )
    text = text.split("[estimation.drift_sources]")[0]
    text = text.replace("fixed_dt = 0.02\n", "")
    path = tmp_path / "exp.toml"
    path.write_text(text)
    cfg = load_config(path, env={})
    assert cfg.solver == "stls"
    assert cfg.lambda_drift == 0.0 and cfg.lambda_diffusion == 0.0
    assert cfg.workers == 1
    assert cfg.fixed_dt is None
    assert cfg.drift_sources == ()


def test_load_config_inline_model(tmp_path):
    path = tmp_path / "inline.toml"
    path.write_text("""
[model.inline]
dim = 2
drift_family = "monomial"
sigma_family = "monomial"

[model.inline.drift.x1]
x2 = 1.0

[model.inline.drift.x2]
x1 = -1.0

[model.inline.sigma."1,1"]
"1" = 1.0

[model.inline.sigma."2,2"]
"1" = 0.5
x1 = 0.1

[dictionary.drift]
family = "monomial"
degree = 2

[dictionary.diffusion]
family = "monomial"
degree = 2

[simulation]
sim_dt = 1e-3
trials = 2
base_seed = 5

[sweep]
dt_values = [0.01]
T_values = [2.0]

[estimation]
methods = ["drift_fd1"]
""")
    cfg = load_config(path, env={})
    assert isinstance(cfg.model, InlineModelSpec)
    m = resolve_model(cfg.model)
    x = np.array([0.4, -0.3])
    np.testing.assert_allclose(m.drift(x), [-0.3, -0.4])
    np.testing.assert_allclose(
        m.diffusion(x), [[1.0, 0.0], [0.0, 0.5 + 0.04]]
    )


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: t.replace('name = "double_well"', ""),
        lambda t: t.replace("[simulation]", "[sim]"),
        lambda t: t.replace("[dictionary.drift]", "[dictionary.slope]"),
        lambda t: t.replace('sim_dt = 1e-3', ""),
        lambda t: t.replace('methods = ["drift_fd1", "diff_trap"]', ""),
        lambda t: t + "\nbad toml [[[",
    ],
)
def test_load_config_structural_errors(tmp_path, mutate):
    path = tmp_path / "exp.toml"
    path.write_text(mutate(GOOD_TOML))
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_load_config_bad_sigma_key(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text("""
[model.inline]
dim = 1

[model.inline.drift.x1]
x1 = -1.0

[model.inline.sigma.diag]
"1" = 1.0

[dictionary.drift]
family = "monomial"
degree = 2

[dictionary.diffusion]
family = "monomial"
degree = 2

[simulation]
sim_dt = 1e-3
trials = 2
base_seed = 5

[sweep]
dt_values = [0.01]
T_values = [2.0]

[estimation]
methods = ["drift_fd1"]
""")
    with pytest.raises(ConfigError, match="i,j"):
        load_config(path, env={})


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "nope.toml", env={})


def test_shipped_configs_all_validate():
    import pathlib

    cfg_dir = pathlib.Path(__file__).resolve().parent.parent / "configs"
    paths = sorted(cfg_dir.glob("*.toml"))
    assert len(paths) >= 8
    for p in paths:
        load_config(p, env={})
