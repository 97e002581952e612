import math
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msprox import Init, Method, StepRule
from msprox.bench import (
    ALL_VARIANTS,
    CSV_COLUMNS,
    BenchConfig,
    TrialRecord,
    default_n_grid,
    emit_csv,
    emit_figure1,
    emit_figure2,
    even_grid,
    figure2_config,
    read_csv,
    run_grid,
    sample_instance,
    summarize,
)


def record(**kw):
    base = dict(
        n=4, trial=0, method="NEWTON_SM", step_rule="UNIT", init="WARM", seed=1, iterations=3,
        wall_time=0.5, final_objective=1.25, final_grad_sq_norm=1e-9, termination="TOLERANCE",
        u_norm_sq=10.0, sigma_cond=2.0, sigma_frob_sq=10.0,
    )
    base.update(kw)
    return TrialRecord(**base)


# ----------------------------------------------------------------- sampling


def test_forced_exponents_example():
    inst = sample_instance(4, 100.0, seed=3, p=0.0, q=1.0)
    assert np.allclose(inst.sigma, [1, 2, 1, 2], rtol=1e-15)
    assert inst.b == 100.0


def test_odd_or_small_sizes_rejected():
    for n in (3, 5, 2):
        with pytest.raises(ValueError):
            sample_instance(n)
    with pytest.raises(ValueError):
        BenchConfig(n_grid=(10, 11))
    with pytest.raises(ValueError):
        BenchConfig(trials_per_n=0)


def test_sampling_is_deterministic():
    a, b = sample_instance(10, seed=42), sample_instance(10, seed=42)
    assert np.array_equal(a.sigma, b.sigma) and np.array_equal(a.u, b.u)
    c = sample_instance(10, seed=43)
    assert not np.array_equal(a.u, c.u)


@given(st.integers(2, 200).map(lambda h: 2 * h), st.integers(0, 2**40))
def test_sampling_ranges(n, seed):
    inst = sample_instance(n, 100.0, seed)
    cond = inst.sigma.max() / inst.sigma.min()
    assert 2.0 - 1e-9 <= cond <= 1001.0 + 1e-9
    assert 10.0 * (1 - 1e-12) <= inst.sigma @ inst.sigma <= 1000.0 * (1 + 1e-12)
    assert 10.0 * (1 - 1e-12) <= inst.u @ inst.u <= 1000.0 * (1 + 1e-12)
    half = n // 2
    assert np.array_equal(inst.sigma[:half], inst.sigma[half:])
    assert np.all(inst.u >= 0)


def test_default_grids():
    grid = default_n_grid()
    assert len(grid) == 20 and grid[0] == 10 and grid[-1] == 2000
    assert all(n % 2 == 0 for n in grid) and grid == sorted(grid)
    assert even_grid(3, 4, 2) == [4, 4]
    assert even_grid(20, 2000, 3) == [20, 200, 2000]
    cfg = figure2_config()
    assert len(cfg.n_grid) == 12 and cfg.trials_per_n == 50
    assert cfg.variants == ((Method.NEWTON_SM, StepRule.UNIT, Init.WARM),)


# --------------------------------------------------------------------- grid


@pytest.fixture(scope="module")
def small_grid():
    return run_grid(BenchConfig(n_grid=(10,), trials_per_n=2, base_seed=7))


def test_grid_counts(small_grid):
    assert len(ALL_VARIANTS) == 12
    assert len(small_grid) == 24
    assert {(r.method, r.step_rule, r.init) for r in small_grid} == {
        (m.name, s.name, i.name) for m, s, i in ALL_VARIANTS
    }


def test_trials_are_paired(small_grid):
    for trial in (0, 1):
        rs = [r for r in small_grid if r.trial == trial]
        assert len({(r.seed, r.u_norm_sq, r.sigma_cond, r.sigma_frob_sq) for r in rs}) == 1
    assert small_grid[0].seed != small_grid[-1].seed


def test_grid_order_and_fields(small_grid):
    assert [r.trial for r in small_grid] == [0] * 12 + [1] * 12
    for r in small_grid:
        assert r.iterations >= 0 and r.wall_time >= 0 and r.sigma_cond >= 1
        assert 10 - 1e-9 <= r.u_norm_sq <= 1000 + 1e-9


def test_grid_is_deterministic(small_grid):
    again = run_grid(BenchConfig(n_grid=(10,), trials_per_n=2, base_seed=7), workers=2)
    strip = lambda rs: [{**r.__dict__, "wall_time": 0} for r in rs]  # noqa: E731
    assert strip(again) == strip(small_grid)


def test_time_limit_is_recorded_as_cap():
    cfg = BenchConfig(
        n_grid=(64,), trials_per_n=1, time_limit=1e-9, max_iter=10**6, tol=1e-300,
        variants=((Method.GRADIENT_DESCENT, StepRule.OPTIMAL, Init.RANDOM),),
    )
    (rec,) = run_grid(cfg)
    assert rec.termination in ("TIME_LIMIT", "STALLED")
    assert summarize([rec])[0]["cap_fraction"] == (rec.termination == "TIME_LIMIT")


def test_newton_needs_fewer_iterations_than_gradient_descent():
    variants = tuple(v for v in ALL_VARIANTS if v[0] is not Method.NEWTON_DENSE)
    recs = run_grid(BenchConfig(n_grid=(16, 64, 256), trials_per_n=10, variants=variants, base_seed=1))
    rows = summarize(recs)
    for n in (16, 64, 256):
        for step in ("UNIT", "OPTIMAL"):
            for init in ("WARM", "RANDOM"):
                cell = {r["method"]: r for r in rows if (r["n"], r["step_rule"], r["init"]) == (n, step, init)}
                sm, gd = cell["NEWTON_SM"], cell["GRADIENT_DESCENT"]
                assert sm["median_iterations"] < gd["median_iterations"]
                assert gd["cap_fraction"] >= sm["cap_fraction"]


# ---------------------------------------------------------------- summarize


def test_summarize_single_record():
    (row,) = summarize([record(iterations=7, wall_time=0.25)])
    assert row["mean_iterations"] == row["median_iterations"] == 7
    assert row["mean_wall_time"] == row["median_wall_time"] == 0.25
    assert row["median_time_per_iteration"] == 0.25 / 7 and row["cap_fraction"] == 0


def test_summarize_two_records():
    (row,) = summarize([record(iterations=2), record(trial=1, iterations=4, termination="MAX_ITER")])
    assert row["mean_iterations"] == 3 and row["median_iterations"] == 3
    assert row["trials"] == 2 and row["cap_fraction"] == 0.5


def test_summarize_groups_by_cell():
    rows = summarize([record(), record(method="GRADIENT_DESCENT"), record(trial=1)])
    assert [(r["method"], r["trials"]) for r in rows] == [("NEWTON_SM", 2), ("GRADIENT_DESCENT", 1)]
    with pytest.raises(ValueError):
        summarize([])


def test_zero_iteration_records():
    (row,) = summarize([record(iterations=0)])
    assert math.isnan(row["median_time_per_iteration"])


# ----------------------------------------------------------------------- csv


@pytest.mark.parametrize("count", [0, 1, 1000])
def test_csv_round_trip(tmp_path, count):
    rng = np.random.default_rng(count)
    recs = [
        record(
            n=int(rng.integers(2, 1000)) * 2, trial=i, iterations=int(rng.integers(0, 10**6)),
            wall_time=float(rng.exponential()), final_objective=float(rng.normal() * 1e3),
            final_grad_sq_norm=float(rng.uniform() * 1e-7), u_norm_sq=float(rng.uniform(10, 1000)),
            sigma_cond=float(rng.uniform(2, 1001)), sigma_frob_sq=float(rng.uniform(10, 1000)),
            seed=int(rng.integers(0, 2**63 - 1)),
        )
        for i in range(count)
    ]
    path = tmp_path / "r.csv"
    emit_csv(recs, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert read_csv(path) == recs


def test_read_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("n,trial\n4,0\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_figure_emitters(tmp_path, small_grid):
    f1, f2 = tmp_path / "f1.csv", tmp_path / "f2.csv"
    emit_figure1(small_grid, f1)
    emit_figure2(small_grid, f2)
    assert len(f1.read_text().splitlines()) == 1 + 12
    lines = f2.read_text().splitlines()
    assert lines[0] == "n,trial,wall_time,iterations,u_norm_sq,sigma_cond,sigma_frob_sq"
    assert len(lines) == 1 + 2


def test_medians_use_statistics_convention():
    rows = summarize([record(trial=i, iterations=k) for i, k in enumerate([1, 5, 9, 100])])
    assert rows[0]["median_iterations"] == statistics.median([1, 5, 9, 100]) == 7
