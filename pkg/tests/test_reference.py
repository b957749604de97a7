import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quinpi.core import (
    INITIAL_CONDITIONS,
    StateVector,
    cell_average,
    l1_error,
    make_grid,
    make_problem,
    project_initial_condition,
    total_mass,
    total_variation,
)
from quinpi.reference import (
    CflViolationError,
    block_average,
    exact_burgers_cell_averages,
    exact_burgers_presock,
    exact_linear,
    fine_grid_reference,
    implicit_upwind_step,
    run_ssprk3,
    shock_time,
    ssprk3_step,
)
from quinpi.scheme import predictor_step

from conftest import state_for

U0 = INITIAL_CONDITIONS["sine-smooth"].func
DU0 = INITIAL_CONDITIONS["sine-smooth"].derivative


def test_ssprk3_constant_and_mass(burgers):
    s = StateVector(make_grid(0, 2, 40), np.full(40, 0.7))
    np.testing.assert_allclose(ssprk3_step(s, 0.01, burgers).values, 0.7, atol=1e-15)
    u = state_for(burgers, 128)
    m0 = total_mass(u)
    for _ in range(10):
        u = ssprk3_step(u, 0.45 * u.grid.h / 0.75, burgers)
        assert total_mass(u) == pytest.approx(m0, abs=1e-13)


def test_ssprk3_cfl_violation(burgers):
    u = state_for(burgers, 64)
    with pytest.raises(CflViolationError):
        ssprk3_step(u, 3 * u.grid.h, burgers)  # alpha = 0.375, limit 2.4 h


def test_ssprk3_third_order(burgers):
    errs = []
    for n in (128, 256, 512):
        u = run_ssprk3(state_for(burgers, n), burgers, 1.0)
        assert u.time == pytest.approx(1.0, abs=1e-14)
        errs.append(l1_error(u, exact_burgers_cell_averages(u.grid, U0, 1.0, DU0)))
    assert np.log2(errs[-2] / errs[-1]) >= 2.7


def test_exact_linear():
    x = np.linspace(-1, 1, 41)[:-1]
    np.testing.assert_allclose(exact_linear(np.sin, x, 0.0, (-1, 1)), np.sin(x))
    f = INITIAL_CONDITIONS["sine-jump"].func
    np.testing.assert_allclose(exact_linear(f, x[1:], 2.0, (-1, 1)), f(x[1:]), atol=1e-12)
    g = lambda y: np.sin(np.pi * y)  # noqa: E731
    np.testing.assert_allclose(exact_linear(g, x, 0.5, (-1, 1)), np.sin(np.pi * (x - 0.5)), atol=1e-12)


def test_exact_burgers_examples():
    x = np.linspace(0, 2, 50)
    np.testing.assert_array_equal(exact_burgers_presock(U0, x, 0.0), U0(x))
    np.testing.assert_allclose(exact_burgers_presock(lambda y: 0 * y + 0.3, x, 1.7), 0.3)
    u = exact_burgers_presock(U0, x, 1.0, DU0)
    assert np.abs(u - U0(x - 0.5 * u)).max() <= 1e-12


def test_exact_burgers_without_derivative():
    x = np.linspace(0, 2, 30)
    u = exact_burgers_presock(U0, x, 1.5)
    assert np.abs(u - U0(x - 0.75 * u)).max() <= 1e-12


def test_exact_burgers_random_samples(rng):
    t_star = shock_time(U0)
    x = rng.uniform(0, 2, 1000)
    t = rng.uniform(0, 0.95 * t_star, 1000)
    u = np.array([exact_burgers_presock(U0, np.array([xi]), ti, DU0)[0] for xi, ti in zip(x, t)])
    assert np.abs(u - U0(x - 0.5 * u * t)).max() <= 1e-12


def test_exact_burgers_after_breaking_fails():
    with pytest.raises(ValueError):
        exact_burgers_presock(U0, np.linspace(0, 2, 200), 4.0, DU0)


def test_shock_time():
    assert shock_time(U0) == pytest.approx(8 / np.pi, rel=1e-6)
    assert shock_time(lambda x: 0 * x + 1.0) == np.inf


def test_block_average():
    np.testing.assert_array_equal(block_average(np.full(64, 2.0), 8), np.full(8, 2.0))
    v = np.arange(10.0)
    np.testing.assert_array_equal(block_average(v, 1), v)
    np.testing.assert_allclose(block_average(v, 2), [0.5, 2.5, 4.5, 6.5, 8.5])
    with pytest.raises(ValueError):
        block_average(v, 3)


def test_fine_grid_reference_matches_exact_shift():
    p = make_problem("advection", "sine-smooth")
    grid = make_grid(-1, 1, 32)
    ref = fine_grid_reference(p, p.initial_condition, 0.5, 8 * 32, grid)
    exact = cell_average(grid, lambda x: p.exact_solution(x, 0.5))
    h_fine = 2 / 256
    assert np.abs(ref - exact).max() <= 50 * h_fine**3
    with pytest.raises(ValueError):
        fine_grid_reference(p, p.initial_condition, 0.5, 100, grid)


def test_implicit_upwind_constant_and_errors():
    s = StateVector(make_grid(0, 1, 20), np.full(20, 1.5))
    np.testing.assert_allclose(implicit_upwind_step(s, 0.3).values, 1.5)
    with pytest.raises(ValueError):
        implicit_upwind_step(s, 0.1, speed=-1.0)


def test_implicit_upwind_tvd_large_ratio():
    p = make_problem("advection", "double-step")
    u = state_for(p, 200)
    for _ in range(50):
        nxt = implicit_upwind_step(u, 50 * u.grid.h)
        assert total_variation(nxt) <= total_variation(u) + 1e-12
        u = nxt


@given(st.sampled_from([0.5, 1.0, 5.0, 20.0, 50.0]), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_implicit_upwind_tvd_random(nu, seed):
    rng = np.random.default_rng(seed)
    grid = make_grid(0, 1, 30)
    u = StateVector(grid, rng.uniform(-1, 1, 30))
    assert total_variation(implicit_upwind_step(u, nu * grid.h)) <= total_variation(u) + 1e-12


def test_implicit_upwind_equals_single_euler_substep():
    p = make_problem("advection", "sine-jump")
    grid = make_grid(-1, 1, 100)
    u = project_initial_condition(grid, p.initial_condition)
    dt = 3 * grid.h
    bundle = predictor_step(u, dt, p, 1.0)
    theta = bundle.tableau.b[0]
    ref = implicit_upwind_step(u, theta * dt)
    np.testing.assert_allclose(bundle.stage_states[0], ref.values, atol=1e-13)
