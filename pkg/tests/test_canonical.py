import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from msprox import (
    BoundsCase,
    CanonicalInstance,
    Method,
    SolverOptions,
    StepRule,
    certify,
    gradient,
    hessian_dense,
    objective,
    solution_bounds,
    solve,
    warm_start,
)
from oracles import fd_gradient, fd_jacobian, hessian_from_definition, objective_loop


def inst2(sigma, u, b):
    return CanonicalInstance(np.array(sigma, float), np.array(u, float), b)


def random_instance(rng, n, u_positive=True):
    sigma = rng.uniform(0.2, 5.0, n)
    u = rng.uniform(0.1 if u_positive else 0.0, 3.0, n)
    return CanonicalInstance(sigma, u, rng.uniform(0.0, 3.0 * float(u @ u)))


# ----------------------------------------------------------------- instance


def test_instance_rejects_bad_fields():
    with pytest.raises(ValueError):
        inst2([1, 0], [1, 1], 1)
    with pytest.raises(ValueError):
        inst2([1, 1], [1, -1], 1)
    with pytest.raises(ValueError):
        inst2([1, 1], [1, 1], -1)
    with pytest.raises(ValueError):
        inst2([1, 1, 1], [1, 1], 1)


def test_instance_is_immutable():
    inst = inst2([1, 2], [1, 1], 2)
    with pytest.raises(ValueError):
        inst.sigma[0] = 5.0


def test_instance_json_round_trip(tmp_path, rng):
    inst = random_instance(rng, 7)
    path = tmp_path / "i.json"
    inst.save(path)
    back = CanonicalInstance.load(path)
    assert np.array_equal(back.sigma, inst.sigma) and np.array_equal(back.u, inst.u) and back.b == inst.b
    assert set(json.loads(path.read_text())) == {"sigma", "u", "b"}


def test_from_dict_names_missing_fields():
    with pytest.raises(KeyError, match="u, b"):
        CanonicalInstance.from_dict({"sigma": [1.0]})


# ---------------------------------------------------------------- objective


def test_objective_at_center_on_shell():
    assert objective([1.0, 1.0], inst2([1, 2], [1, 1], 2)) == 0.0


def test_objective_arithmetic():
    assert objective([1.0, 0.0], inst2([1, 2], [1, 1], 1)) == 2.0


def test_objective_matches_loop_evaluation(rng):
    for _ in range(20):
        inst = random_instance(rng, 8)
        x = rng.normal(size=8)
        assert objective(x, inst) == pytest.approx(objective_loop(inst.sigma, inst.u, inst.b, x), rel=1e-13)


def test_objective_dimension_mismatch():
    with pytest.raises(ValueError):
        objective([1.0], inst2([1, 2], [1, 1], 1))


# ----------------------------------------------------------------- gradient


def test_gradient_arithmetic():
    assert np.array_equal(gradient([1.0, 0.0], inst2([1, 2], [1, 1], 1)), [0.0, -4.0])


def test_gradient_vanishes_at_center_on_shell():
    inst = inst2([1.5, 2.0, 0.3], [1.0, 2.0, 0.5], 5.25)
    assert np.array_equal(gradient(inst.u, inst), np.zeros(3))


def test_gradient_matches_finite_differences(rng):
    inst = random_instance(rng, 16)
    x = rng.normal(size=16)
    g = gradient(x, inst)
    fd = fd_gradient(lambda z: objective_loop(inst.sigma, inst.u, inst.b, z), x)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)


def test_gradient_dimension_mismatch():
    with pytest.raises(ValueError):
        gradient(np.zeros(3), inst2([1, 2], [1, 1], 1))


# ------------------------------------------------------------------ hessian


def test_hessian_at_origin_is_diagonal():
    inst = inst2([1.0, 3.0, 0.5], [1, 1, 1], 2.0)
    assert np.array_equal(hessian_dense(np.zeros(3), inst), np.diag(-8.0 + 2 * np.array([1.0, 3.0, 0.5])))


def test_hessian_arithmetic():
    # 8 e1 e1^T + 4 (1 - 0) I + 2 I
    assert np.array_equal(hessian_dense([1.0, 0.0], inst2([1, 1], [0, 0], 0)), [[14.0, 0.0], [0.0, 6.0]])


def test_hessian_matches_finite_differences(rng):
    inst = random_instance(rng, 12)
    x = rng.normal(size=12)
    h = hessian_dense(x, inst)
    fd = fd_jacobian(lambda z: gradient(z, inst), x)
    assert np.linalg.norm(h - fd) <= 1e-5 * np.linalg.norm(h)
    assert np.array_equal(h, h.T)
    assert np.allclose(h, hessian_from_definition(inst.sigma, inst.b, x), rtol=1e-14, atol=1e-12)


# ------------------------------------------------------------------- bounds


def test_bounds_u_dominates():
    bd = solution_bounds(inst2([1.0, 7.0], [3, 4], 16))
    assert bd.case_tag is BoundsCase.U_DOMINATES
    assert (bd.norm_lo, bd.norm_hi) == (16.0, 25.0)
    assert np.array_equal(bd.elem_hi, [3.0, 4.0]) and np.array_equal(bd.elem_lo, [0.0, 0.0])


def test_bounds_b_dominates():
    bd = solution_bounds(inst2([1.0, 2.0], [3, 4], 36))
    assert bd.case_tag is BoundsCase.B_DOMINATES
    assert (bd.norm_lo, bd.norm_hi) == (35.5, 36.0)
    assert bd.elem_hi[0] == math.inf and bd.elem_hi[1] == 8.0
    assert np.array_equal(bd.elem_lo, [3.0, 4.0])


def test_bounds_equal_case():
    bd = solution_bounds(inst2([1.0, 2.0], [3, 4], 25))
    assert bd.case_tag is BoundsCase.EQUAL
    assert bd.norm_lo == bd.norm_hi == 25.0
    assert np.array_equal(bd.elem_hi, [3.0, 4.0])


def test_solved_minimizer_satisfies_bounds(rng):
    for _ in range(10):
        inst = random_instance(rng, 16)
        rep = solve(inst, SolverOptions(tol=1e-20, max_iter=200))
        assert certify(rep.x_star, inst).is_certified
        bd = solution_bounds(inst)
        assert bd.violation(rep.x_star) <= 1e-9
        assert bd.norm_lo <= bd.norm_hi and np.all(bd.elem_lo <= bd.elem_hi)


# --------------------------------------------------------------- warm start


@pytest.mark.parametrize(
    "u, b, expected",
    [([3, 4], 25, [3.0, 4.0]), ([2, 0], 1, [1.0, 0.0]), ([0, 0], 8, [2.0, 2.0])],
)
def test_warm_start_examples(u, b, expected):
    assert np.allclose(warm_start(inst2([1, 1], u, b)), expected, rtol=1e-15)


# ---------------------------------------------------------------- certify


def test_origin_is_stationary_but_not_certified_when_u_is_zero():
    inst = inst2([1.0, 2.0, 3.0], [0, 0, 0], 10.0)
    cert = certify(np.zeros(3), inst)
    assert cert.stationarity_residual == 0.0
    assert cert.min_multiplier == -19.0
    assert not cert.is_certified


def test_certified_solution_loses_stationarity_under_sign_flip(rng):
    inst = random_instance(rng, 10)
    rep = solve(inst, SolverOptions(tol=1e-20, max_iter=200))
    cert = certify(rep.x_star, inst)
    assert cert.is_certified
    flipped = rep.x_star.copy()
    flipped[3] = -flipped[3]
    assert not certify(flipped, inst).is_certified
    assert np.array_equal(cert.lifted_z, rep.x_star**2)


def test_zero_center_entry_has_mirror_minimizer(rng):
    # the zero entry carries the smallest weight and b is large, so the
    # minimizer is nonzero there
    sigma = rng.uniform(0.5, 2.0, 6)
    sigma[2] = 0.1
    u = rng.uniform(0.5, 2.0, 6)
    u[2] = 0.0
    inst = CanonicalInstance(sigma, u, 40.0)
    # the warm start has x[2] = 0, a saddle the solver must step off
    rep = solve(inst, SolverOptions(method=Method.NEWTON_DENSE, step_rule=StepRule.OPTIMAL, tol=1e-14, max_iter=5000))
    assert rep.escape_steps >= 1
    assert certify(rep.x_star, inst).is_certified
    mirrored = rep.x_star.copy()
    mirrored[2] = -mirrored[2]
    assert rep.x_star[2] != 0.0
    assert objective(mirrored, inst) == pytest.approx(rep.objective, rel=1e-12)


def test_certify_dimension_mismatch():
    with pytest.raises(ValueError):
        certify(np.zeros(1), inst2([1, 2], [1, 1], 1))


def test_certificate_is_pure_function_of_tolerances():
    inst = inst2([1.0, 2.0], [1.0, 1.0], 1.0)
    x = np.array([0.9, 0.2])
    cert = certify(x, inst, stationarity_tol=10.0, multiplier_slack=0.0)
    assert cert.is_certified == (cert.stationarity_residual <= 10.0 and cert.min_multiplier >= 0.0)
    assert not certify(x, inst, stationarity_tol=1e-3).is_certified


# --------------------------------------------------------------- properties

finite = st.floats(-20, 20, allow_nan=False)
positive = st.floats(0.01, 50, allow_nan=False)
nonneg = st.floats(0, 20, allow_nan=False)


@st.composite
def instance_and_point(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    sigma = draw(arrays(float, n, elements=positive))
    u = draw(arrays(float, n, elements=nonneg))
    b = draw(st.floats(0, 400, allow_nan=False))
    x = draw(arrays(float, n, elements=finite))
    return CanonicalInstance(sigma, u, b), x


@given(instance_and_point())
def test_objective_is_nonnegative(data):
    inst, x = data
    assert objective(x, inst) >= 0.0
    assert math.isfinite(objective(warm_start(inst), inst))


@given(instance_and_point(min_n=2), st.data())
def test_sign_flip_at_zero_center_entry_is_exact(data, draw):
    inst, x = data
    k = draw.draw(st.integers(0, inst.n - 1))
    u = inst.u.copy()
    u[k] = 0.0
    inst = CanonicalInstance(inst.sigma, u, inst.b)
    y = x.copy()
    y[k] = -y[k]
    assert objective(y, inst) == objective(x, inst)


@given(instance_and_point())
def test_multiplier_identity(data):
    inst, x = data
    cert = certify(x, inst)
    assert np.array_equal(cert.multipliers, 2.0 * (x @ x - inst.b) + inst.sigma)
    assert cert.min_multiplier == cert.multipliers.min()
    assert np.array_equal(cert.lifted_z, x * x)


@given(instance_and_point())
def test_warm_start_lies_on_norm_shell(data):
    inst, _ = data
    x0 = warm_start(inst)
    assert float(x0 @ x0) == pytest.approx(inst.b, rel=1e-12, abs=1e-300)
    assert np.all(x0 >= 0)


@given(instance_and_point())
def test_bounds_are_ordered(data):
    inst, _ = data
    bd = solution_bounds(inst)
    assert bd.norm_lo <= bd.norm_hi
    assert np.all(bd.elem_lo <= bd.elem_hi)
