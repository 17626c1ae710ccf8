import numpy as np
import pytest

from rbsdelab.barriers import BarrierSet, effective_barriers
from rbsdelab.drivers import Driver
from rbsdelab.lattice import (
    IncreasingProcess,
    Lattice,
    TimeGrid,
    expectation_level,
)
from rbsdelab.oracle import quadratic_closed_form
from rbsdelab.solver import (
    ImplicitStepDivergence,
    NonFiniteDriver,
    budget_defect,
    comparison_check,
    implicit_step,
    solve_rbsde,
)


@pytest.fixture
def lat():
    return Lattice(TimeGrid(1.0, 6))


def free_barriers(lattice, xi):
    return BarrierSet.build(lattice, xi)


def band_barriers(lattice, xi, width):
    # feasible two-sided band around the payoff curve, shrinking to xi
    def payoff(t, b):
        return np.sin(2.0 * b) + 0.1 * t

    lo = [
        payoff(lattice.times[i], lattice.brownian(i))
        - width * (1.0 - lattice.times[i] / lattice.grid.horizon)
        for i in range(lattice.steps)
    ] + [xi]
    hi = [
        payoff(lattice.times[i], lattice.brownian(i))
        + width * (1.0 - lattice.times[i] / lattice.grid.horizon)
        for i in range(lattice.steps)
    ] + [xi]
    from rbsdelab.lattice import AdaptedProcess

    return BarrierSet.build(
        lattice,
        xi,
        L=AdaptedProcess(lattice, lo),
        U=AdaptedProcess(lattice, hi),
    )


def test_implicit_step_takes_the_generator_literally():
    # rate 0.5 z**2 over dt=0.25 with slope 2 adds exactly 0.5*4*0.25
    y = implicit_step(1.0, 2.0, 0.0, Driver.quadratic(0.5), 0.0, 0.25)
    assert y == 1.0 + 0.5 * 4.0 * 0.25


def test_implicit_step_linear_root():
    drv = Driver.linear(0.5, 0.0, 0.3)
    y = implicit_step(2.0, 0.0, 0.0, drv, 0.0, 0.25)
    # y = E + (a y + c) dt  =>  y = (E + c dt) / (1 - a dt)
    assert abs(y - (2.0 + 0.3 * 0.25) / (1.0 - 0.5 * 0.25)) < 1e-10


def test_implicit_step_clock_rate():
    drv = Driver(
        f=lambda t, y, z: np.zeros_like(y),
        g=lambda t, y_left, y: np.full_like(y, 2.0),
    )
    assert implicit_step(1.0, 0.0, 0.0, drv, 0.5, 0.25) == 2.0


def test_implicit_step_validation():
    with pytest.raises(ValueError):
        implicit_step(0.0, 0.0, 0.0, Driver.zero(), 0.0, 0.0)
    with pytest.raises(ValueError):
        implicit_step(0.0, 0.0, 0.0, Driver.zero(), -0.1, 0.5)


def test_implicit_step_divergence():
    # y = 1 + y**2 has no real root; the bracket search must give up
    drv = Driver(f=lambda t, y, z: y * y)
    with pytest.raises(ImplicitStepDivergence):
        implicit_step(1.0, 0.0, 0.0, drv, 0.0, 1.0)


def test_non_finite_driver_names_the_node(lat):
    def f(t, y, z):
        out = np.zeros_like(y)
        if y.size == 3:
            out[1] = np.nan
        return out

    xi = np.zeros(lat.steps + 1)
    with pytest.raises(NonFiniteDriver) as info:
        solve_rbsde(lat, Driver(f=f), free_barriers(lat, xi))
    assert info.value.level == 2
    assert info.value.node == 1


def test_zero_driver_solve_is_the_plain_expectation(lat):
    xi = np.cos(3.0 * lat.brownian(lat.steps))
    sol = solve_rbsde(lat, Driver.zero(), free_barriers(lat, xi))
    for i in reversed(range(lat.steps)):
        assert np.array_equal(sol.Y.level(i), expectation_level(sol.Y.level(i + 1)))
    from math import comb

    weights = np.array([comb(lat.steps, j) for j in range(lat.steps + 1)])
    direct = float(weights @ xi) / 2.0**lat.steps
    # different summation orders; intermediates are order one
    assert abs(sol.value() - direct) < 1e-14
    assert sol.residuals.within(0.0)
    for j in range(lat.steps):
        assert not sol.Kplus.atom(j).any()
        assert not sol.Kminus.atom(j).any()
        assert not sol.drift.atom(j).any()


def test_linear_value_driver_compounds(lat):
    a = 0.8
    xi = np.ones(lat.steps + 1)
    sol = solve_rbsde(lat, Driver.linear(a, 0.0, 0.0), free_barriers(lat, xi))
    expected = (1.0 - a * lat.dt) ** (-lat.steps)
    assert abs(sol.value() - expected) < 1e-10


def test_slope_driver_shifts_by_rate_times_horizon(lat):
    b = 0.7
    xi = lat.brownian(lat.steps)
    sol = solve_rbsde(lat, Driver.linear(0.0, b, 0.0), free_barriers(lat, xi))
    # the slope stays 1 at every node, so each step adds exactly b*dt
    assert abs(sol.value() - b * lat.grid.horizon) < 1e-12
    for j in range(lat.steps):
        assert np.allclose(sol.Z.atom(j), 1.0, atol=1e-12)


def test_source_increments_accumulate(lat):
    drv = Driver(
        f=lambda t, y, z: np.zeros_like(y),
        source=lambda j: np.full(j + 1, 0.1),
    )
    xi = np.zeros(lat.steps + 1)
    sol = solve_rbsde(lat, drv, free_barriers(lat, xi))
    assert abs(sol.value() - 0.1 * lat.steps) < 1e-12


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_quadratic_driver_matches_its_closed_form(c):
    lat = Lattice(TimeGrid(1.0, 8))
    xi = np.tanh(lat.brownian(lat.steps))
    sol = solve_rbsde(lat, Driver.quadratic(c), free_barriers(lat, xi))
    assert abs(sol.value() - quadratic_closed_form(c, xi)) < 1e-12


def test_lower_obstacle_flat_off_is_exact(lat):
    # optional-stopping instance: zero driver, floor at the payoff
    xi = np.maximum(1.0 - np.exp(lat.brownian(lat.steps)), 0.0)
    floors = [
        np.maximum(1.0 - np.exp(lat.brownian(i)), 0.0)
        for i in range(lat.steps)
    ] + [xi]
    from rbsdelab.lattice import AdaptedProcess

    bars = BarrierSet.build(
        lat, xi, L=AdaptedProcess(lat, floors)
    )
    sol = solve_rbsde(lat, Driver.zero(), bars)
    assert any(sol.Kplus.atom(j).any() for j in range(lat.steps))
    assert sol.residuals.flat_off_plus == 0.0
    assert sol.residuals.singularity_defect == 0.0
    for j in range(lat.steps):
        low, _ = effective_barriers(bars, j)
        dkp = sol.Kplus.atom(j)
        y = sol.Y.level(j)
        assert np.all((dkp == 0.0) | (y == low))


def test_two_sided_clamp_keeps_increments_apart(lat):
    xi = np.sin(2.0 * lat.brownian(lat.steps)) + 0.1
    bars = band_barriers(lat, xi, width=0.05)
    sol = solve_rbsde(lat, Driver.linear(0.0, 0.0, 1.5), bars)
    hit_low = any(sol.Kplus.atom(j).any() for j in range(lat.steps))
    hit_high = any(sol.Kminus.atom(j).any() for j in range(lat.steps))
    assert hit_low or hit_high
    assert sol.residuals.singularity_defect == 0.0
    for j in range(lat.steps):
        assert np.all(sol.Kplus.atom(j) * sol.Kminus.atom(j) == 0.0)
        low, high = effective_barriers(bars, j)
        assert np.all(sol.Y.level(j) >= np.where(np.isfinite(low), low, -np.inf))
        assert np.all(sol.Y.level(j) <= np.where(np.isfinite(high), high, np.inf))


def test_predictable_atom_clamps_the_pre_jump_value(lat):
    xi = np.zeros(lat.steps + 1)
    delta = IncreasingProcess.from_time_atoms(lat, {3: 1.0})
    from rbsdelab.lattice import PredictableProcess

    floor = PredictableProcess.from_time_values(lat, {3: 0.75})
    bars = BarrierSet.build(lat, xi, l=floor, delta=delta)
    sol = solve_rbsde(lat, Driver.zero(), bars)
    # the floor binds the value one level before the charged time and
    # the martingale carries it back to the root; after the atom the
    # solution drops straight back to the plain expectation
    assert np.all(sol.Y.level(2) == 0.75)
    assert np.all(sol.Y.level(3) == 0.0)
    assert sol.value() == 0.75
    assert np.all(sol.Kplus.atom(2) == 0.75)


def test_terminal_mismatch_rejected(lat):
    xi = np.zeros(lat.steps + 1)
    bars = free_barriers(lat, xi)
    with pytest.raises(ValueError):
        solve_rbsde(lat, Driver.zero(), bars, xi=xi + 1.0)


def test_comparison_orders_nested_drivers(lat):
    xi = np.sin(2.0 * lat.brownian(lat.steps)) + 0.1
    bars = band_barriers(lat, xi, width=0.4)
    drv_small = Driver.linear(0.3, 0.5, -0.1)
    drv_big = Driver.linear(0.3, 0.5, 0.2)
    sol_small = solve_rbsde(lat, drv_small, bars)
    sol_big = solve_rbsde(lat, drv_big, bars)
    report = comparison_check(sol_big, sol_small, drv_big, drv_small, bars, bars)
    assert report.hypotheses_ok
    assert report.passed
    assert report.max_order_violation == 0.0

    # swapping the roles must be caught by both audits
    swapped = comparison_check(sol_small, sol_big, drv_small, drv_big, bars, bars)
    assert not swapped.drift_domination_ok
    assert not swapped.ordered
    assert swapped.max_order_violation > 0.0


def test_budget_defect_is_rounding_sized():
    lat = Lattice(TimeGrid(1.0, 8))
    xi = np.sin(2.0 * lat.brownian(lat.steps)) + 0.1
    bars = band_barriers(lat, xi, width=0.05)
    sol = solve_rbsde(lat, Driver.linear(0.4, -0.3, 0.8), bars)
    assert budget_defect(sol) < 1e-10


def test_solution_repr_mentions_the_root_value(lat):
    xi = np.ones(lat.steps + 1)
    sol = solve_rbsde(lat, Driver.zero(), free_barriers(lat, xi))
    assert sol.value() == 1.0
    assert "1.0" in repr(sol)
