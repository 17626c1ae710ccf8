import numpy as np
import pytest

from rbsdelab.lattice import (
    AdaptedProcess,
    IncreasingProcess,
    Lattice,
    PredictableProcess,
    TimeGrid,
    all_paths,
    conditional_expectation,
    expectation_level,
    increment_level,
    martingale_increment_coefficient,
    path_nodes,
)


@pytest.fixture
def lat():
    return Lattice(TimeGrid(1.0, 6))


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 4)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 4)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(float("inf"), 4)


def test_grid_times():
    g = TimeGrid(2.0, 4)
    assert np.array_equal(g.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert g.dt == 0.5
    assert g == TimeGrid(2.0, 4)
    assert g != TimeGrid(2.0, 5)
    assert hash(g) == hash(TimeGrid(2.0, 4))


def test_walk_values(lat):
    # node j at level i sits at (2j - i) * sqrt(dt)
    h = lat.sqrt_dt
    assert np.array_equal(lat.brownian(0), [0.0])
    assert np.allclose(lat.brownian(2), [-2 * h, 0.0, 2 * h])
    assert lat.node_count(3) == 4
    with pytest.raises(IndexError):
        lat.brownian(7)
    with pytest.raises(IndexError):
        lat.node_count(-1)


def test_walk_is_martingale(lat):
    B = lat.brownian_process()
    h = lat.sqrt_dt
    for i in range(lat.steps):
        for j in range(i + 1):
            e = conditional_expectation(B, i, j)
            assert abs(e - B.level(i)[j]) <= 4 * np.spacing(abs(e) + h)
            m = martingale_increment_coefficient(B, i, j)
            assert abs(m - 1.0) <= 8 * np.spacing(1.0)


def test_adapted_shape_checks(lat):
    with pytest.raises(ValueError):
        AdaptedProcess(lat, [np.zeros(i + 1) for i in range(3)])
    bad = [np.zeros(i + 1) for i in range(lat.steps + 1)]
    bad[2] = np.zeros(5)
    with pytest.raises(ValueError):
        AdaptedProcess(lat, bad)
    bad[2] = np.array([0.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        AdaptedProcess(lat, bad)


def test_adapted_is_frozen(lat):
    X = AdaptedProcess.constant(lat, 1.0)
    with pytest.raises(ValueError):
        X.level(2)[0] = 3.0
    # infinities are legal values, NaN is not
    Y = AdaptedProcess.constant(lat, -np.inf)
    assert np.all(np.isneginf(Y.terminal()))


def test_adapted_from_function(lat):
    X = AdaptedProcess.from_function(lat, lambda t, b: b * b + t)
    for i in range(lat.steps + 1):
        b = lat.brownian(i)
        assert np.array_equal(X.level(i), b * b + lat.times[i])
    C = AdaptedProcess.from_function(lat, lambda t, b: 2.5)
    assert np.array_equal(C.level(3), np.full(4, 2.5))


def test_with_terminal(lat):
    X = AdaptedProcess.constant(lat, 0.0)
    xi = np.arange(lat.steps + 1, dtype=float)
    Y = X.with_terminal(xi)
    assert np.array_equal(Y.terminal(), xi)
    assert np.array_equal(Y.level(2), X.level(2))
    Z = X.with_terminal(7.0)
    assert np.all(Z.terminal() == 7.0)


def test_along_path(lat):
    B = lat.brownian_process()
    ups = np.array([1, 0, 1, 1, 0, 0])
    vals = B.along_path(ups)
    walk = np.concatenate([[0.0], np.cumsum(2.0 * ups - 1.0) * lat.sqrt_dt])
    assert np.allclose(vals, walk)


def test_predictable_slots(lat):
    P = PredictableProcess.from_function(lat, lambda t_next, b: b + t_next)
    # slot i is measurable at level i but attributed to t_{i+1}
    for i in range(lat.steps):
        assert P.atom(i).shape == (i + 1,)
        assert np.array_equal(P.atom(i), lat.brownian(i) + lat.times[i + 1])


def test_predictable_from_time_values(lat):
    P = PredictableProcess.from_time_values(lat, {2: 5.0}, fill=-np.inf)
    assert np.all(P.atom(1) == 5.0)
    assert np.all(np.isneginf(P.atom(0)))
    assert np.all(np.isneginf(P.atom(3)))
    with pytest.raises(ValueError):
        PredictableProcess.from_time_values(lat, {0: 1.0})
    with pytest.raises(ValueError):
        PredictableProcess.from_time_values(lat, {lat.steps + 1: 1.0})


def test_clock_validation(lat):
    with pytest.raises(ValueError):
        IncreasingProcess(
            lat, [np.full(i + 1, -0.1) for i in range(lat.steps)]
        )
    with pytest.raises(ValueError):
        IncreasingProcess(
            lat, [np.full(i + 1, np.inf) for i in range(lat.steps)]
        )


def test_clock_constructors(lat):
    Z = IncreasingProcess.zero(lat)
    assert not any(Z.support(i).any() for i in range(lat.steps))
    Leb = IncreasingProcess.lebesgue(lat)
    assert all(Leb.support(i).all() for i in range(lat.steps))
    w = Leb.weights_by_time()
    assert w[0] == 0.0
    assert np.allclose(w[1:], lat.dt)

    D = IncreasingProcess.from_time_atoms(lat, {3: 0.5, 6: 1.0})
    assert np.all(D.atom(2) == 0.5)
    assert np.all(D.atom(5) == 1.0)
    assert not D.support(0).any()
    with pytest.raises(ValueError):
        IncreasingProcess.from_time_atoms(lat, {3: -1.0})
    with pytest.raises(ValueError):
        IncreasingProcess.from_time_atoms(lat, {0: 1.0})


def test_clock_node_dependent_weights(lat):
    atoms = [np.zeros(i + 1) for i in range(lat.steps)]
    atoms[2][0] = 1.0
    D = IncreasingProcess(lat, atoms)
    assert not D.is_time_indexed()
    with pytest.raises(ValueError):
        D.weights_by_time()


def test_clock_along_path(lat):
    D = IncreasingProcess.from_time_atoms(lat, {2: 0.25, 5: 0.75})
    ups = np.zeros(lat.steps, dtype=int)
    cum = D.cumulative_along(ups)
    assert cum[0] == 0.0
    assert cum[2] == 0.25
    assert cum[4] == 0.25
    assert cum[5] == 1.0
    assert D.total_along(ups) == 1.0


def test_level_operators_match_nodewise(lat):
    rng = np.random.default_rng(0)
    X = AdaptedProcess(
        lat, [rng.standard_normal(i + 1) for i in range(lat.steps + 1)]
    )
    for i in range(lat.steps):
        E = expectation_level(X.level(i + 1))
        Z = increment_level(X.level(i + 1), lat.sqrt_dt)
        for j in range(i + 1):
            assert E[j] == conditional_expectation(X, i, j)
            assert Z[j] == martingale_increment_coefficient(X, i, j)


def test_tower_property(lat):
    # iterating the one-step expectation from the terminal level gives
    # the unconditional mean: sum of xi against binomial weights / 2^N
    rng = np.random.default_rng(1)
    xi = rng.standard_normal(lat.steps + 1)
    v = xi
    for _ in range(lat.steps):
        v = expectation_level(v)
    from math import comb

    mean = sum(xi[k] * comb(lat.steps, k) for k in range(lat.steps + 1))
    mean /= 2.0 ** lat.steps
    assert abs(v[0] - mean) < 1e-14


def test_all_paths():
    P = all_paths(3)
    assert P.shape == (8, 3)
    assert np.array_equal(P[0], [0, 0, 0])
    assert np.array_equal(P[5], [1, 0, 1])
    assert len(np.unique(P, axis=0)) == 8
    with pytest.raises(ValueError):
        all_paths(21)
    with pytest.raises(ValueError):
        all_paths(-1)


def test_path_nodes():
    assert np.array_equal(path_nodes([1, 0, 1]), [0, 1, 1, 2])
    assert np.array_equal(path_nodes([]), [0])


def test_path_enumeration_consistency(lat):
    # along_path over every enumerated path visits each node the
    # binomial number of times
    from math import comb

    counts = {}
    for ups in all_paths(lat.steps):
        nodes = path_nodes(ups)
        for i, j in enumerate(nodes):
            counts[(i, int(j))] = counts.get((i, int(j)), 0) + 1
    for (i, j), c in counts.items():
        assert c == comb(i, j) * 2 ** (lat.steps - i)
