import numpy as np
import pytest

from rbsdelab.barriers import effective_barriers
from rbsdelab.drivers import Driver, SemimartingaleSpec
from rbsdelab.lattice import (
    AdaptedProcess,
    IncreasingProcess,
    Lattice,
    PredictableProcess,
    TimeGrid,
    expectation_level,
)
from rbsdelab.oracle import exhaustive_stopping_value
from rbsdelab.snell import (
    HypothesisAViolated,
    SnellInstance,
    snell_envelope,
    snell_lebesgue,
    snell_stopping_time_atom,
)
from rbsdelab.solver import budget_defect, solve_rbsde


def martingale_spec(lat, terminal):
    """Decomposition of the martingale closing at ``terminal``."""
    levels = [np.asarray(terminal, dtype=float)]
    for _ in range(lat.steps):
        levels.append(expectation_level(levels[-1]))
    levels.reverse()
    gamma = [
        (levels[i + 1][1:] - levels[i + 1][:-1]) / (2.0 * lat.sqrt_dt)
        for i in range(lat.steps)
    ]
    zeros = [np.zeros(i + 1) for i in range(lat.steps)]
    spec = SemimartingaleSpec(
        float(levels[0][0]),
        IncreasingProcess(lat, zeros),
        IncreasingProcess(lat, zeros),
        PredictableProcess(lat, gamma),
    )
    return spec, levels


def dominated_instance(steps=6, seed=11, with_witness=True):
    """Obstacles kept under an explicit closing martingale."""
    lat = Lattice(TimeGrid(1.0, steps))
    rng = np.random.default_rng(seed)
    spec, m_levels = martingale_spec(
        lat, np.cosh(lat.brownian(steps)) + rng.uniform(0.0, 0.5, steps + 1)
    )
    L = AdaptedProcess(
        lat,
        [
            m_levels[i] - rng.uniform(0.05, 0.8, i + 1)
            for i in range(steps + 1)
        ],
    )
    k = max(1, steps // 2)
    delta = IncreasingProcess.from_time_atoms(lat, {k: 1.0})
    slots = [np.full(i + 1, -np.inf) for i in range(steps)]
    slots[k - 1] = m_levels[k - 1] - rng.uniform(0.0, 0.2, k)
    l = PredictableProcess(lat, slots)
    xi = m_levels[steps] - rng.uniform(0.0, 0.3, steps + 1)
    return SnellInstance(
        L, l, delta, xi, witness=spec if with_witness else None
    )


def test_audit_rejects_bounded_variation_mass():
    inst = dominated_instance()
    lat = inst.lattice
    spec = inst.witness
    bumped = SemimartingaleSpec(
        spec.s0,
        spec.vplus,
        IncreasingProcess(
            lat,
            [
                np.full(i + 1, 0.1 if i == 2 else 0.0)
                for i in range(lat.steps)
            ],
        ),
        spec.gamma,
    )
    bad = SnellInstance(inst.L, inst.l, inst.delta, inst.xi, witness=bumped)
    with pytest.raises(HypothesisAViolated) as info:
        snell_envelope(bad)
    assert "martingale" in str(info.value)


def test_audit_rejects_obstacle_above_witness():
    inst = dominated_instance()
    lat = inst.lattice
    levels = [inst.L.level(i).copy() for i in range(lat.steps + 1)]
    levels[3][1] += 5.0
    bad = SnellInstance(
        AdaptedProcess(lat, levels),
        inst.l,
        inst.delta,
        inst.xi,
        witness=inst.witness,
    )
    with pytest.raises(HypothesisAViolated) as info:
        bad.audit()
    assert info.value.level == 3
    assert info.value.node == 1


def test_audit_rejects_left_limit_above_witness():
    inst = dominated_instance()
    lat = inst.lattice
    k = max(1, lat.steps // 2)
    slots = [inst.l.atom(i).copy() for i in range(lat.steps)]
    slots[k - 1][0] += 5.0
    bad = SnellInstance(
        inst.L,
        PredictableProcess(lat, slots),
        inst.delta,
        inst.xi,
        witness=inst.witness,
    )
    with pytest.raises(HypothesisAViolated) as info:
        bad.audit()
    assert "left limit" in str(info.value)


def test_missing_witness_warns_and_proceeds():
    inst = dominated_instance(with_witness=False)
    with pytest.warns(UserWarning, match="witness"):
        sol = snell_envelope(inst)
    assert np.isfinite(sol.value())


def test_envelope_equals_the_general_solver_bitwise():
    inst = dominated_instance()
    sol = snell_envelope(inst)
    general = solve_rbsde(inst.lattice, Driver.zero(), inst.barriers)
    for i in range(inst.lattice.steps + 1):
        assert np.array_equal(sol.Y.level(i), general.Y.level(i))
    for j in range(inst.lattice.steps):
        assert np.array_equal(sol.Z.atom(j), general.Z.atom(j))
        assert np.array_equal(sol.Kplus.atom(j), general.Kplus.atom(j))


def test_envelope_is_a_flat_off_supermartingale():
    inst = dominated_instance(seed=5)
    sol = snell_envelope(inst)
    lat = inst.lattice
    for j in range(lat.steps):
        E = expectation_level(sol.Y.level(j + 1))
        y = sol.Y.level(j)
        assert np.all(y >= E)
        low, _ = effective_barriers(inst.barriers, j)
        dkp = sol.Kplus.atom(j)
        assert np.all((dkp == 0.0) | (y == low))
        assert not sol.Kminus.atom(j).any()
        assert not sol.drift.atom(j).any()
    assert budget_defect(sol) < 1e-12


def test_constant_floor_by_hand():
    lat = Lattice(TimeGrid(1.0, 2))
    L = AdaptedProcess.constant(lat, 0.5)
    xi = np.array([2.0, 0.0, 2.0])
    inst = SnellInstance(L, None, None, xi)
    with pytest.warns(UserWarning):
        sol = snell_envelope(inst)
    # level 1: max(mean children, 0.5) = (1, 1); root: max(1, 0.5)
    assert np.array_equal(sol.Y.level(1), [1.0, 1.0])
    assert sol.value() == 1.0


@pytest.mark.parametrize("steps", range(3, 13))
def test_early_exercise_value_matches_plain_recursion(steps):
    lat = Lattice(TimeGrid(1.0, steps))
    strike = 1.1

    def payoff(i):
        return np.maximum(strike - np.exp(lat.brownian(i)), 0.0)

    L = AdaptedProcess(lat, [payoff(i) for i in range(steps + 1)])
    inst = SnellInstance(L, None, None, payoff(steps))
    with pytest.warns(UserWarning):
        sol = snell_envelope(inst)
    v = payoff(steps)
    for i in range(steps - 1, -1, -1):
        v = np.maximum(0.5 * (v[:-1] + v[1:]), payoff(i))
    assert abs(sol.value() - float(v[0])) < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_envelope_agrees_with_exhaustive_stopping(seed):
    lat = Lattice(TimeGrid(1.0, 4))
    rng = np.random.default_rng(seed)
    L = AdaptedProcess(
        lat, [rng.uniform(-1.0, 1.0, i + 1) for i in range(lat.steps + 1)]
    )
    xi = rng.uniform(-1.0, 1.0, lat.steps + 1)
    inst = SnellInstance(L, None, None, xi)
    with pytest.warns(UserWarning):
        sol = snell_envelope(inst)
    assert abs(sol.value() - exhaustive_stopping_value(L, xi)) < 1e-12


def test_envelope_is_smallest_among_dominating_supermartingales():
    inst = dominated_instance(seed=7)
    lat = inst.lattice
    sol = snell_envelope(inst)
    rng = np.random.default_rng(17)
    for _ in range(20):
        slack = [rng.uniform(0.0, 0.4, i + 1) for i in range(lat.steps + 1)]
        d = np.asarray(inst.xi, dtype=float) + slack[lat.steps]
        dominating = [d]
        for j in range(lat.steps - 1, -1, -1):
            low, _ = effective_barriers(inst.barriers, j)
            d = np.maximum(expectation_level(d), low) + slack[j]
            dominating.append(d)
        dominating.reverse()
        for i in range(lat.steps + 1):
            assert np.all(dominating[i] >= sol.Y.level(i) - 1e-12)


def test_lebesgue_clock_must_charge_everywhere():
    lat = Lattice(TimeGrid(1.0, 4))
    L = AdaptedProcess.constant(lat, -np.inf).with_terminal(np.zeros(5))
    partial = IncreasingProcess.from_time_atoms(lat, {2: 1.0})
    floor = PredictableProcess.constant(lat, 0.0)
    inst = SnellInstance(L, floor, partial, np.zeros(5))
    with pytest.raises(ValueError, match="level 0"):
        snell_lebesgue(inst)


def test_lebesgue_floor_binds_at_every_level():
    lat = Lattice(TimeGrid(1.0, 4))
    L = AdaptedProcess.constant(lat, -np.inf).with_terminal(np.zeros(5))
    full = IncreasingProcess(lat, [np.ones(i + 1) for i in range(lat.steps)])
    floor = PredictableProcess.constant(lat, 0.25)
    inst = SnellInstance(L, floor, full, np.zeros(5))
    with pytest.warns(UserWarning):
        sol = snell_lebesgue(inst)
    for i in range(lat.steps):
        assert np.all(sol.Y.level(i) >= 0.25)
    assert sol.value() == 0.25


def test_stopping_time_atom_validation():
    lat = Lattice(TimeGrid(1.0, 4))
    L = AdaptedProcess.constant(lat, -np.inf).with_terminal(np.zeros(5))
    xi = np.zeros(5)
    with pytest.raises(ValueError, match="grid time"):
        snell_stopping_time_atom(lat, 0.37, 1.0, L, xi)
    with pytest.raises(ValueError, match="time 0"):
        snell_stopping_time_atom(lat, 0.0, 1.0, L, xi)
    with pytest.raises(ValueError, match="one value per node"):
        snell_stopping_time_atom(lat, 0.5, np.zeros(7), L, xi)


def test_stopping_time_atom_clamps_one_level():
    lat = Lattice(TimeGrid(1.0, 4))
    L = AdaptedProcess.constant(lat, -np.inf).with_terminal(np.zeros(5))
    xi = np.zeros(5)
    with pytest.warns(UserWarning):
        sol = snell_stopping_time_atom(lat, 0.75, 0.6, L, xi)
    # the scalar broadcasts over level 2; everything upstream is its
    # plain expectation and downstream the constraint has no force
    assert np.all(sol.Y.level(2) == 0.6)
    assert np.all(sol.Y.level(3) == 0.0)
    assert sol.value() == 0.6


def test_stopping_time_atom_inactive_when_low():
    lat = Lattice(TimeGrid(1.0, 4))
    payoff = [np.cos(lat.brownian(i)) for i in range(5)]
    L = AdaptedProcess(lat, payoff)
    xi = payoff[-1]
    with pytest.warns(UserWarning):
        plain = snell_envelope(SnellInstance(L, None, None, xi))
    with pytest.warns(UserWarning):
        tied = snell_stopping_time_atom(
            lat, 0.5, np.full(2, -100.0), L, xi
        )
    for i in range(lat.steps + 1):
        assert np.array_equal(plain.Y.level(i), tied.Y.level(i))
