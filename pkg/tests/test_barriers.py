import math

import numpy as np
import pytest

from rbsdelab.barriers import (
    BarrierSet,
    InfeasibleBarriers,
    check_left_constraint,
    dom_membership,
    effective_barriers,
    envelope_n,
    envelope_profile,
    envelope_star,
    envelope_star_profile,
)
from rbsdelab.lattice import (
    AdaptedProcess,
    IncreasingProcess,
    Lattice,
    PredictableProcess,
    TimeGrid,
)
from rbsdelab.oracle import envelope_brute_force


@pytest.fixture
def lat():
    return Lattice(TimeGrid(1.0, 4))


# hand case: atoms at t1 and t3 of a 5-point grid, weight n = 1
TIMES = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
GVALS = np.array([9.0, 1.0, 5.0, 2.0, 7.0])
WEIGHTS = np.array([0.0, 1.0, 0.0, 2.0, 0.0])


def test_envelope_hand_case():
    prof = envelope_profile(TIMES, GVALS, WEIGHTS, 1.0)
    assert np.array_equal(
        prof.values, [-np.inf, 1.0, 0.75, 2.0, 1.75]
    )
    assert np.array_equal(
        prof.left_limit_values, [-np.inf, -np.inf, 0.75, 0.5, 1.75]
    )
    assert prof.n == 1.0


def test_envelope_zero_weight_is_running_max():
    prof = envelope_profile(TIMES, GVALS, WEIGHTS, 0.0)
    assert np.array_equal(prof.values, [-np.inf, 1.0, 1.0, 2.0, 2.0])


def test_envelope_star_hand_case():
    prof = envelope_star_profile(TIMES, GVALS, WEIGHTS)
    assert np.array_equal(
        prof.values, [-np.inf, 1.0, -np.inf, 2.0, -np.inf]
    )
    assert np.all(np.isneginf(prof.left_limit_values))
    assert prof.n == math.inf


def test_envelope_drift_compensation():
    # value(t) + n*t is the running max of g + n*s over atoms: nondecreasing
    rng = np.random.default_rng(7)
    for _ in range(20):
        npts = rng.integers(2, 40)
        times = np.sort(rng.uniform(0, 1, npts))
        times[0] = 0.0
        g = rng.normal(0, 3, npts)
        w = np.where(rng.random(npts) < 0.4, rng.uniform(0.1, 2, npts), 0.0)
        n = float(rng.uniform(0, 10))
        prof = envelope_profile(times, g, w, n)
        lifted = prof.values + n * times
        fin = np.isfinite(lifted)
        if fin.any():
            k0 = int(np.argmax(fin))
            assert not fin[:k0].any()  # -inf exactly until the first atom
            assert np.all(np.diff(lifted[k0:]) >= -1e-12)


def _within_4ulp(a, b):
    # equality covers shared infinities; spacing handles the finite part
    same = a == b
    with np.errstate(invalid="ignore"):
        gap = np.abs(a - b) <= 4.0 * np.spacing(
            np.maximum(np.abs(a), np.abs(b))
        )
    return bool(np.all(same | gap))


def test_envelope_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(25):
        npts = rng.integers(2, 60)
        times = np.unique(rng.uniform(0, 1, npts))
        g = rng.normal(0, 2, times.size)
        w = np.where(
            rng.random(times.size) < 0.5,
            rng.uniform(0.05, 1, times.size),
            0.0,
        )
        n = float(rng.choice([0.0, 0.5, 3.0, 50.0]))
        fast = envelope_profile(times, g, w, n)
        slow_values, slow_left = envelope_brute_force(times, g, w, n)
        assert _within_4ulp(fast.values, slow_values)
        assert _within_4ulp(fast.left_limit_values, slow_left)


def test_envelope_validation():
    with pytest.raises(ValueError):
        envelope_profile(TIMES, GVALS[:3], WEIGHTS, 1.0)
    with pytest.raises(ValueError):
        envelope_profile(TIMES, np.where(GVALS > 3, np.nan, GVALS), WEIGHTS, 1.0)
    with pytest.raises(ValueError):
        envelope_profile(TIMES, GVALS, -WEIGHTS, 1.0)
    with pytest.raises(ValueError):
        envelope_profile(TIMES, GVALS, WEIGHTS, -1.0)
    with pytest.raises(ValueError):
        envelope_profile(TIMES, GVALS, WEIGHTS, np.inf)


def test_envelope_result_frozen():
    prof = envelope_profile(TIMES, GVALS, WEIGHTS, 1.0)
    with pytest.raises(ValueError):
        prof.values[0] = 0.0


def test_envelope_scalar_accessors(lat):
    rho = IncreasingProcess.from_time_atoms(lat, {1: 1.0, 3: 2.0})
    g = GVALS
    assert envelope_n(g, rho, 1.0, 0.5) == 0.75
    assert envelope_n(g, rho, 1.0, 1.0) == 1.75
    assert envelope_star(g, rho, 0.75) == 2.0
    assert envelope_star(g, rho, 0.5) == -np.inf
    with pytest.raises(ValueError):
        envelope_n(g, rho, 1.0, 0.3)  # not a grid time
    with pytest.raises(TypeError):
        envelope_n(g, PredictableProcess.constant(lat, 1.0), 1.0, 0.5)


def test_envelope_star_dominated_by_finite_n(lat):
    # the hard envelope is the monotone limit from below of the finite-n
    # ones: star <= envelope_n for every n, equality on atoms
    rho = IncreasingProcess.from_time_atoms(lat, {2: 1.0})
    g = np.array([0.0, 0.0, 4.0, 0.0, 0.0])
    for t in lat.times:
        s = envelope_star(g, rho, t)
        for n in (0.0, 1.0, 10.0, 1e6):
            assert s <= envelope_n(g, rho, n, t) + 1e-9


def test_barrier_build_defaults(lat):
    xi = lat.brownian(lat.steps)
    bars = BarrierSet.build(lat, xi)
    assert np.array_equal(bars.xi, xi)
    assert np.all(np.isneginf(bars.L.level(2)))
    assert np.all(np.isposinf(bars.U.level(2)))
    assert np.array_equal(bars.L.terminal(), xi)
    assert np.array_equal(bars.U.terminal(), xi)
    low, high = effective_barriers(bars, lat.steps)
    assert np.array_equal(low, xi)
    assert np.array_equal(high, xi)


def test_barrier_terminal_must_be_finite(lat):
    with pytest.raises(ValueError):
        BarrierSet.build(lat, np.full(lat.steps + 1, np.inf))


def test_barrier_normalization_required(lat):
    L = AdaptedProcess.constant(lat, -1.0)
    U = AdaptedProcess.constant(lat, 1.0)
    kw = dict(
        l=PredictableProcess.constant(lat, -np.inf),
        u=PredictableProcess.constant(lat, np.inf),
        delta=IncreasingProcess.zero(lat),
        alpha=IncreasingProcess.zero(lat),
    )
    with pytest.raises(ValueError):
        BarrierSet(L, U, **kw)  # terminals differ
    xi = np.zeros(lat.steps + 1)
    bars = BarrierSet(L.with_terminal(xi), U.with_terminal(xi), **kw)
    assert np.array_equal(bars.xi, xi)


def test_barrier_rejects_wrong_infinities(lat):
    xi = np.zeros(lat.steps + 1)
    L_bad = AdaptedProcess.constant(lat, np.inf)
    with pytest.raises(ValueError):
        BarrierSet.build(lat, xi, L=L_bad)
    U_bad = AdaptedProcess.constant(lat, -np.inf)
    with pytest.raises(ValueError):
        BarrierSet.build(lat, xi, U=U_bad)
    with pytest.raises(ValueError):
        BarrierSet.build(
            lat,
            xi,
            l=PredictableProcess.constant(lat, np.inf),
            delta=IncreasingProcess.lebesgue(lat),
        )
    with pytest.raises(ValueError):
        BarrierSet.build(
            lat,
            xi,
            u=PredictableProcess.constant(lat, -np.inf),
            alpha=IncreasingProcess.lebesgue(lat),
        )


def test_barrier_grid_mismatch(lat):
    other = Lattice(TimeGrid(1.0, 5))
    with pytest.raises(ValueError):
        BarrierSet.build(
            lat,
            np.zeros(lat.steps + 1),
            L=AdaptedProcess.constant(other, -1.0),
        )


def test_effective_barriers_merge(lat):
    xi = np.zeros(lat.steps + 1)
    L = AdaptedProcess.constant(lat, -1.0)
    U = AdaptedProcess.constant(lat, 1.0)
    l = PredictableProcess.from_time_values(lat, {2: -0.5})
    u = PredictableProcess.from_time_values(lat, {3: 0.25}, fill=np.inf)
    delta = IncreasingProcess.from_time_atoms(lat, {2: 1.0})
    alpha = IncreasingProcess.from_time_atoms(lat, {3: 1.0})
    bars = BarrierSet.build(
        lat, xi, L=L, U=U, l=l, u=u, delta=delta, alpha=alpha
    )
    low, high = effective_barriers(bars, 1)  # t2 charged by delta
    assert np.all(low == -0.5)
    assert np.all(high == 1.0)
    low, high = effective_barriers(bars, 2)  # t3 charged by alpha
    assert np.all(low == -1.0)
    assert np.all(high == 0.25)
    low, high = effective_barriers(bars, 0)  # nothing charges t1
    assert np.all(low == -1.0)
    assert np.all(high == 1.0)


def test_effective_barriers_ignore_value_off_support(lat):
    # a predictable obstacle entry where the clock puts no mass is inert
    xi = np.zeros(lat.steps + 1)
    l = PredictableProcess.constant(lat, 99.0)
    bars = BarrierSet.build(
        lat, xi, l=l, delta=IncreasingProcess.zero(lat)
    )
    for j in range(lat.steps):
        low, _ = effective_barriers(bars, j)
        assert np.all(np.isneginf(low))


def test_infeasible_barriers_name_the_node(lat):
    xi = np.zeros(lat.steps + 1)
    L = AdaptedProcess.constant(lat, 0.0)
    levels = [np.full(i + 1, 5.0) for i in range(lat.steps + 1)]
    levels[2][1] = -3.0  # crossing at level 2, node 1
    U = AdaptedProcess(lat, levels)
    with pytest.raises(InfeasibleBarriers) as err:
        BarrierSet.build(lat, xi, L=L, U=U)
    assert err.value.level == 2
    assert err.value.node == 1
    assert err.value.low == 0.0
    assert err.value.high == -3.0


def test_check_left_constraint(lat):
    Y = AdaptedProcess.from_function(lat, lambda t, b: b)
    rho = IncreasingProcess.from_time_atoms(lat, {3: 1.0})
    # constraint reads the level before the atom: level 2 here
    g_ok = PredictableProcess(
        lat, [lat.brownian(i) - 0.1 for i in range(lat.steps)]
    )
    assert check_left_constraint(Y, g_ok, rho)
    bad = [lat.brownian(i) - 0.1 for i in range(lat.steps)]
    bad[2] = lat.brownian(2) + 0.1
    g_bad = PredictableProcess(lat, bad)
    assert not check_left_constraint(Y, g_bad, rho)
    # the violation is invisible to a clock that never charges t3
    rho_off = IncreasingProcess.from_time_atoms(lat, {1: 1.0})
    assert check_left_constraint(Y, g_bad, rho_off)


def test_dom_membership(lat):
    xi = lat.brownian(lat.steps)
    B = lat.brownian_process()
    bars = BarrierSet.build(
        lat,
        xi,
        L=AdaptedProcess.from_function(lat, lambda t, b: b - 1.0),
        U=AdaptedProcess.from_function(lat, lambda t, b: b + 1.0),
        l=PredictableProcess.from_function(lat, lambda t, b: b - 0.5),
        u=PredictableProcess.from_function(lat, lambda t, b: b + 0.5),
        delta=IncreasingProcess.lebesgue(lat),
        alpha=IncreasingProcess.lebesgue(lat),
    )
    assert dom_membership(B, bars)
    shifted = AdaptedProcess(
        lat, [B.level(i) + 0.75 for i in range(lat.steps + 1)]
    )
    assert not dom_membership(shifted, bars)  # breaks u at left limits
    outside = AdaptedProcess(
        lat, [B.level(i) + 1.5 for i in range(lat.steps + 1)]
    )
    assert not dom_membership(outside, bars)  # breaks U outright
