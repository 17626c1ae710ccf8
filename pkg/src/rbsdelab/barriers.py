"""Obstacles, their penalization envelopes, and admissibility checks.

Four obstacles constrain the solution: a lower and an upper node-indexed
(rcll) obstacle acting on ``Y_t`` for ``t < T``, and a lower and an
upper predictable obstacle acting on the left limit ``Y_{t-}`` at the
atoms of two increasing clocks.  The predictable constraints collapse,
on the lattice, to interval constraints at the level preceding each
atom; :func:`effective_barriers` performs that merge.

The envelope transform of a sampled function ``g`` along a clock
``rho`` with penalty weight ``n`` is

    value(t) = -n*t + max{ g(s) + n*s : s <= t, clock charges s },

with ``-inf`` over an empty set.  Its monotone limit in ``n`` keeps
``g(t)`` exactly on the clock's support and drops to ``-inf`` off it;
both are computed in one left-to-right scan.  The transform is what
turns an "almost everywhere against a measure" constraint into a
pointwise one, and the tests exercise that equivalence by enumeration.

Infinities are legal obstacle values throughout: ``-inf`` disables a
lower constraint, ``+inf`` an upper one.  NaN is rejected at
construction time by the process containers.
"""

import math

import numpy as np

from .lattice import (
    AdaptedProcess,
    IncreasingProcess,
    PredictableProcess,
    _frozen,
)

__all__ = [
    "InfeasibleBarriers",
    "EnvelopeResult",
    "envelope_profile",
    "envelope_n",
    "envelope_star_profile",
    "envelope_star",
    "BarrierSet",
    "effective_barriers",
    "check_left_constraint",
    "dom_membership",
]


class InfeasibleBarriers(Exception):
    """Merged obstacle interval empty at some node."""

    def __init__(self, level, node, low, high):
        self.level = int(level)
        self.node = int(node)
        self.low = float(low)
        self.high = float(high)
        super().__init__(
            f"empty obstacle interval at (level {self.level}, node "
            f"{self.node}): lower {self.low!r} > upper {self.high!r}"
        )


class EnvelopeResult:
    """Envelope of a sampled function along a clock, at one penalty weight.

    ``values[k]`` is the envelope at grid time ``t_k`` and
    ``left_limit_values[k]`` its left limit there (atoms strictly
    before ``t_k`` only).  ``n`` is ``math.inf`` for the hard limit.
    """

    __slots__ = ("n", "values", "left_limit_values")

    def __init__(self, n, values, left_limit_values):
        self.n = float(n)
        self.values = _frozen(values)
        self.left_limit_values = _frozen(left_limit_values)

    def __repr__(self):
        return f"EnvelopeResult(n={self.n!r}, points={self.values.size})"


def envelope_profile(times, g, weights, n):
    """One-scan envelope of ``g`` along a deterministic clock.

    Parameters
    ----------
    times : array, shape (N+1,)
        Grid times, strictly increasing.
    g : array, shape (N+1,)
        Function values at the grid times; only entries on the clock's
        support matter.  May contain +-inf, never NaN.
    weights : array, shape (N+1,)
        Clock mass at each grid time, all >= 0.  ``weights[k] > 0``
        marks an atom at ``t_k``.
    n : nonnegative finite float
        Penalty weight.

    Returns
    -------
    EnvelopeResult
        ``values[k] = -n*t_k + max{g[s] + n*t_s : s <= k, weights[s] > 0}``
        and the strict-past variant in ``left_limit_values``; both are
        ``-inf`` while no atom has occurred.
    """
    t = np.asarray(times, dtype=float)
    gv = np.asarray(g, dtype=float)
    w = np.asarray(weights, dtype=float)
    if t.ndim != 1 or gv.shape != t.shape or w.shape != t.shape:
        raise ValueError("times, g, weights must be equal-length 1-d arrays")
    if np.isnan(gv).any():
        raise ValueError("g contains NaN")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("clock weights must be finite and >= 0")
    n = float(n)
    if not (n >= 0.0) or not math.isfinite(n):
        raise ValueError("n must be a finite nonnegative number")

    values = np.empty_like(t)
    left = np.empty_like(t)
    # track the maximizing atom by its drift-lifted key, but evaluate
    # the envelope as g(s*) - n*(t - s*): subtracting first avoids the
    # cancellation a large n*t would force on the lifted form
    best_key = -np.inf
    best_idx = -1
    for k in range(t.size):
        tk = t[k]
        if best_idx < 0:
            left[k] = -np.inf
        else:
            left[k] = gv[best_idx] - n * (tk - t[best_idx])
        if w[k] > 0.0:
            key = gv[k] + n * tk
            if key > best_key:
                best_key = key
                best_idx = k
        if best_idx < 0:
            values[k] = -np.inf
        else:
            values[k] = gv[best_idx] - n * (tk - t[best_idx])
    return EnvelopeResult(n, values, left)


def _clock_profile(rho):
    """Times and per-time weights of a time-indexed clock."""
    if not isinstance(rho, IncreasingProcess):
        raise TypeError("rho must be an IncreasingProcess")
    return rho.lattice.times, rho.weights_by_time()


def _grid_index(times, t):
    idx = int(np.argmin(np.abs(times - float(t))))
    if abs(times[idx] - float(t)) > 1e-9 * max(1.0, abs(times[-1])):
        raise ValueError(f"{t!r} is not a grid time")
    return idx


def envelope_n(g, rho, n, t):
    """Envelope value at grid time ``t`` for penalty weight ``n``.

    ``g`` holds per-time samples (length N+1) and ``rho`` must be a
    time-indexed clock.  Returns -inf when ``rho`` has no atom in
    ``[0, t]``.
    """
    times, w = _clock_profile(rho)
    prof = envelope_profile(times, g, w, n)
    return float(prof.values[_grid_index(times, t)])


def envelope_star_profile(times, g, weights):
    """Hard (infinite-penalty) envelope: ``g`` on atoms, -inf elsewhere.

    For a clock with finitely many atoms the left limit is -inf
    everywhere, since a left neighborhood of any time is eventually
    atom-free.
    """
    t = np.asarray(times, dtype=float)
    gv = np.asarray(g, dtype=float)
    w = np.asarray(weights, dtype=float)
    if t.ndim != 1 or gv.shape != t.shape or w.shape != t.shape:
        raise ValueError("times, g, weights must be equal-length 1-d arrays")
    if np.isnan(gv).any():
        raise ValueError("g contains NaN")
    values = np.where(w > 0.0, gv, -np.inf)
    left = np.full_like(t, -np.inf)
    return EnvelopeResult(math.inf, values, left)


def envelope_star(g, rho, t):
    """Hard envelope at grid time ``t``: ``g(t)`` on an atom, else -inf."""
    times, w = _clock_profile(rho)
    prof = envelope_star_profile(times, g, w)
    return float(prof.values[_grid_index(times, t)])


class BarrierSet:
    """The four obstacles, their clocks, and an optional witness process.

    Constructing one validates that every instance is already in
    normalized form: both node-indexed obstacles end at the same finite
    terminal values (the terminal condition), and the merged obstacle
    interval is nonempty at every node.  Use :meth:`build` to assemble
    one from raw pieces; it applies the terminal normalization for you.

    ``witness`` optionally carries the decomposition data of a process
    known to satisfy all four constraints (consumed by the penalization
    scheme); it is stored as-is and never interpreted here.
    """

    __slots__ = ("lattice", "L", "U", "l", "u", "delta", "alpha", "witness")

    def __init__(self, L, U, l, u, delta, alpha, witness=None):
        lattice = L.lattice
        for other in (U, l, u, delta, alpha):
            if other.lattice.grid != lattice.grid:
                raise ValueError("barrier pieces live on different grids")
        if not (
            isinstance(L, AdaptedProcess)
            and isinstance(U, AdaptedProcess)
            and isinstance(l, PredictableProcess)
            and isinstance(u, PredictableProcess)
            and isinstance(delta, IncreasingProcess)
            and isinstance(alpha, IncreasingProcess)
        ):
            raise TypeError("barrier pieces have wrong types")
        xi_low = L.terminal()
        xi_high = U.terminal()
        if not np.all(np.isfinite(xi_low)):
            raise ValueError("terminal values must be finite")
        if not np.array_equal(xi_low, xi_high):
            raise ValueError(
                "obstacles are not terminally normalized; use BarrierSet.build"
            )
        # -inf disables a lower constraint and +inf an upper one; the
        # opposite signs would force infinite solutions, so reject them
        if any(np.any(L.level(i) == np.inf) for i in range(lattice.steps)):
            raise ValueError("lower node obstacle takes the value +inf")
        if any(np.any(U.level(i) == -np.inf) for i in range(lattice.steps)):
            raise ValueError("upper node obstacle takes the value -inf")
        if any(np.any(l.atom(i) == np.inf) for i in range(lattice.steps)):
            raise ValueError("lower predictable obstacle takes the value +inf")
        if any(np.any(u.atom(i) == -np.inf) for i in range(lattice.steps)):
            raise ValueError("upper predictable obstacle takes the value -inf")
        self.lattice = lattice
        self.L = L
        self.U = U
        self.l = l
        self.u = u
        self.delta = delta
        self.alpha = alpha
        self.witness = witness
        for j in range(lattice.steps):
            effective_barriers(self, j)

    @classmethod
    def build(
        cls,
        lattice,
        xi,
        L=None,
        U=None,
        l=None,
        u=None,
        delta=None,
        alpha=None,
        witness=None,
    ):
        """Assemble a validated obstacle set.

        ``xi`` (scalar or one value per terminal node) becomes the
        common terminal value of both node-indexed obstacles.  Omitted
        pieces default to the unconstrained ones: ``L = -inf``,
        ``U = +inf``, predictable obstacles vacuous, clocks zero.
        """
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 0:
            xi = np.full(lattice.steps + 1, float(xi))
        if L is None:
            L = AdaptedProcess.constant(lattice, -np.inf)
        if U is None:
            U = AdaptedProcess.constant(lattice, np.inf)
        if l is None:
            l = PredictableProcess.constant(lattice, -np.inf)
        if u is None:
            u = PredictableProcess.constant(lattice, np.inf)
        if delta is None:
            delta = IncreasingProcess.zero(lattice)
        if alpha is None:
            alpha = IncreasingProcess.zero(lattice)
        return cls(
            L.with_terminal(xi),
            U.with_terminal(xi),
            l,
            u,
            delta,
            alpha,
            witness=witness,
        )

    @property
    def xi(self):
        """Common terminal values of the normalized obstacles."""
        return self.L.terminal()

    def __repr__(self):
        return f"BarrierSet(steps={self.lattice.steps})"


def effective_barriers(bars, level):
    """Merged obstacle interval per node of ``level``.

    The lower effective obstacle is the node obstacle joined with the
    lower predictable obstacle wherever the lower clock charges the
    next grid time; the upper one mirrors this.  At the terminal level
    both equal the terminal values.  Raises
    :class:`InfeasibleBarriers` when the interval is empty at a node.
    """
    steps = bars.lattice.steps
    if level == steps:
        xi = bars.xi
        return xi, xi
    low = bars.L.level(level)
    high = bars.U.level(level)
    low = np.maximum(
        low, np.where(bars.delta.support(level), bars.l.atom(level), -np.inf)
    )
    high = np.minimum(
        high, np.where(bars.alpha.support(level), bars.u.atom(level), np.inf)
    )
    bad = low > high
    if bad.any():
        node = int(np.argmax(bad))
        raise InfeasibleBarriers(level, node, low[node], high[node])
    return _frozen(low), _frozen(high)


def check_left_constraint(Y, g, rho):
    """Does ``g <= Y_{t-}`` hold at every atom of ``rho``?

    ``Y`` is node-indexed, ``g`` predictable, ``rho`` a clock.  The
    left limit at ``t_{i+1}`` is the level-``i`` value, so the per-path
    quantifier reduces to a node-wise test.  Ties pass.
    """
    if Y.lattice.grid != rho.lattice.grid:
        raise ValueError("processes live on different grids")
    for i in range(Y.lattice.steps):
        on = rho.support(i)
        if not on.any():
            continue
        if np.any(g.atom(i)[on] > Y.level(i)[on]):
            return False
    return True


def dom_membership(Y, bars):
    """Does ``Y`` satisfy all four obstacle constraints?

    Node obstacles are tested at every node before the terminal time;
    predictable obstacles at every clock atom through the left limit.
    The terminal value of ``Y`` is unconstrained here.
    """
    for i in range(Y.lattice.steps):
        yl = Y.level(i)
        if np.any(bars.L.level(i) > yl) or np.any(yl > bars.U.level(i)):
            return False
    if not check_left_constraint(Y, bars.l, bars.delta):
        return False
    for i in range(Y.lattice.steps):
        on = bars.alpha.support(i)
        if on.any() and np.any(Y.level(i)[on] > bars.u.atom(i)[on]):
            return False
    return True
