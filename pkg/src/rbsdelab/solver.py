"""Backward solver for the doubly reflected equation in standard form.

One backward step at level ``j`` does three things, per node:

1. aggregates the next level into the one-step expectation and the
   martingale slope (both exact two-point formulas);
2. solves the scalar implicit equation
   ``y = E + f(t, y, Z) dt + g(t, y, y) dA (+ structural terms)``
   by monotone bracketing and bisection; a generator's declared
   squared-slope component is not frozen into an Euler term but
   integrated by its exact one-step exponential average, which keeps
   the step strictly monotone in the next level's values at any step
   size and makes pure squared-slope generators exact;
3. projects the unconstrained value onto the merged obstacle interval,
   recording the two projection residuals as the increments of the
   reflection processes.

Because the projection is a clamp, the Skorokhod flat-off and the
mutual singularity of the two reflection processes hold exactly, not
up to a tolerance; the solver still reports them, as regression
guards.  The realized per-step drift (solved value minus one-step
expectation) is recorded verbatim, so the per-path budget identity
telescopes to floating-point accumulation error.
"""

import math

from dataclasses import dataclass

import numpy as np

from .barriers import effective_barriers
from .lattice import (
    AdaptedProcess,
    IncreasingProcess,
    PredictableProcess,
    all_paths,
    expectation_level,
    increment_level,
)

__all__ = [
    "ImplicitStepDivergence",
    "NonFiniteDriver",
    "SkorokhodReport",
    "Solution",
    "ComparisonReport",
    "implicit_step",
    "solve_rbsde",
    "comparison_check",
    "budget_defect",
]

_LN2 = math.log(2.0)

# absolute bisection tolerance on the unknown, and iteration caps
_BISECT_TOL = 1e-12
_BISECT_MAX = 200
_EXPAND_MAX = 64
# roots further than this (relative) from the starting value sit where
# float cancellation erases the drift term entirely, so a vanishing
# residual there proves nothing: treat them as divergence
_SANE_SPAN = 1e12


class ImplicitStepDivergence(Exception):
    """Bracketing failed; the implicit step has no reachable root.

    Usually means the drift grows at least linearly in ``y`` with
    ``rate * dt >= 1`` (too coarse a grid) or a clock rate violating
    the monotonicity requirement.
    """

    def __init__(self, level, node, span):
        self.level = int(level)
        self.node = int(node)
        self.span = float(span)
        super().__init__(
            f"no sign change within +-{self.span!r} of the base value at "
            f"(level {self.level}, node {self.node})"
        )


class NonFiniteDriver(Exception):
    """Generator produced NaN or overflow during a step."""

    def __init__(self, level, node):
        self.level = int(level)
        self.node = int(node)
        super().__init__(
            f"generator returned a non-finite value at "
            f"(level {self.level}, node {self.node})"
        )


@dataclass(frozen=True)
class SkorokhodReport:
    """Reflection certificates, maxima over all nodes.

    ``flat_off_plus``: largest lower-reflection mass placed while the
    solution sat strictly above the lower obstacle; ``flat_off_minus``
    mirrors it; ``singularity_defect``: largest product of the two
    reflection increments at one node.  All are exactly zero for the
    clamp-based projection and are reported as regression guards.
    """

    flat_off_plus: float
    flat_off_minus: float
    singularity_defect: float

    def within(self, tol):
        return (
            self.flat_off_plus <= tol
            and self.flat_off_minus <= tol
            and self.singularity_defect <= tol
        )


class Solution:
    """Output of one backward solve.

    ``Y`` is node-indexed; ``Z`` (martingale slope), ``drift`` (realized
    per-step drift, reflection excluded) and the two reflection
    processes are all attributed to the step ending at the next grid
    time, hence predictable.
    """

    __slots__ = ("Y", "Z", "Kplus", "Kminus", "residuals", "drift")

    def __init__(self, Y, Z, Kplus, Kminus, residuals, drift):
        self.Y = Y
        self.Z = Z
        self.Kplus = Kplus
        self.Kminus = Kminus
        self.residuals = residuals
        self.drift = drift

    @property
    def lattice(self):
        return self.Y.lattice

    def value(self):
        """The solved value at the root node."""
        return float(self.Y.level(0)[0])

    def __repr__(self):
        return (
            f"Solution(steps={self.lattice.steps}, "
            f"value={self.value()!r})"
        )


def _lncosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - _LN2


def _tilt_increment(coef, w, sqrt_dt):
    """Exact one-step value of a squared-slope drift component.

    For the component ``coef * (z - center)**2`` with realized slope
    offset ``w = Z - center``, the exponential change of variable gives
    the closed one-step increment ``lncosh(2 coef w sqrt_dt)/(2 coef)``
    (any sign of ``coef``; zero contributes nothing).  Its derivative
    in ``Z`` is ``sqrt_dt * tanh(...)``, bounded by ``sqrt_dt``, which
    is what keeps the step monotone unconditionally.
    """
    coef = np.asarray(coef, dtype=float)
    w = np.asarray(w, dtype=float)
    live = coef != 0.0
    safe = np.where(live, coef, 1.0)
    out = _lncosh(2.0 * safe * w * sqrt_dt) / (2.0 * safe)
    return np.where(live, out, 0.0)


def _implicit_core(base, Z, t, dt, level, f_drift, g_fn, dA, penalty):
    """Vectorized solve of ``y = base + F(y)`` per node.

    ``F(y) = f_drift(t, y, Z) dt + g_fn(t, y, y) dA + penalty(level, y)``
    with absent pieces skipped.  Returns the root array; raises
    :class:`NonFiniteDriver` / :class:`ImplicitStepDivergence`.
    """
    base = np.asarray(base, dtype=float)
    use_g = g_fn is not None and dA is not None and np.any(dA > 0.0)

    def F(y):
        out = np.zeros_like(base)
        if f_drift is not None:
            out = out + np.asarray(f_drift(t, y, Z), dtype=float) * dt
        if use_g:
            out = out + np.asarray(g_fn(t, y, y), dtype=float) * dA
        if penalty is not None:
            out = out + np.asarray(penalty(level, y), dtype=float)
        return np.broadcast_to(out, base.shape)

    def bad_node(values):
        return int(np.argmin(np.isfinite(values)))

    Fb = F(base)
    if not np.all(np.isfinite(Fb)):
        raise NonFiniteDriver(level, bad_node(Fb))
    y0 = base + Fb
    F0 = F(y0)
    if not np.all(np.isfinite(F0)):
        raise NonFiniteDriver(level, bad_node(F0))
    if np.array_equal(F0, Fb):
        # drift does not depend on the unknown here: y0 is the exact root
        return y0

    def phi(y):
        return y - base - F(y)

    lo = np.minimum(base, y0) - 1.0
    hi = np.maximum(base, y0) + 1.0
    span = np.ones_like(base)
    for _ in range(_EXPAND_MAX):
        bad = phi(lo) > 0.0
        if not bad.any():
            break
        span = np.where(bad, 2.0 * span, span)
        lo = np.where(bad, lo - span, lo)
    else:
        node = int(np.argmax(phi(lo) > 0.0))
        raise ImplicitStepDivergence(level, node, float(span.max()))
    span = np.ones_like(base)
    for _ in range(_EXPAND_MAX):
        bad = phi(hi) < 0.0
        if not bad.any():
            break
        span = np.where(bad, 2.0 * span, span)
        hi = np.where(bad, hi + span, hi)
    else:
        node = int(np.argmax(phi(hi) < 0.0))
        raise ImplicitStepDivergence(level, node, float(span.max()))

    for _ in range(_BISECT_MAX):
        if float(np.max(hi - lo)) <= _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        neg = phi(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    y = 0.5 * (lo + hi)

    # one fixed-point polish; keep whichever candidate has the smaller
    # residual, element-wise
    yp = base + F(y)
    better = np.abs(phi(yp)) < np.abs(phi(y))
    y = np.where(better, yp, y)
    if not np.all(np.isfinite(y)):
        raise NonFiniteDriver(level, bad_node(y))
    runaway = np.abs(y - base) > _SANE_SPAN * (1.0 + np.abs(base))
    if runaway.any():
        node = int(np.argmax(runaway))
        raise ImplicitStepDivergence(
            level, node, float(np.abs(y - base)[node])
        )
    return y


def implicit_step(E, Z, t, driver, dA, dt):
    """Solve ``y = E + f(t, y, Z) dt + g(t, y, y) dA`` for one node.

    The generator is taken at face value (no structural terms): the
    drift rate is integrated with ``dt`` as written, so a generator
    with rate ``c z**2`` steps to exactly ``E + c Z**2 dt``.
    """
    dt = float(dt)
    dA = float(dA)
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if dA < 0.0:
        raise ValueError("dA must be >= 0")
    y = _implicit_core(
        np.array([float(E)]),
        np.array([float(Z)]),
        float(t),
        dt,
        level=-1,
        f_drift=driver.f,
        g_fn=driver.g,
        dA=np.array([dA]),
        penalty=None,
    )
    return float(y[0])


def solve_rbsde(lattice, driver, barriers, xi=None):
    """Backward induction over the whole lattice.

    ``xi`` defaults to the obstacle set's normalized terminal values
    and must equal them when given.  Per level: expectation and slope
    from the solved next level, the implicit drift step (structural
    squared-slope, source and penalty terms included), then the clamp
    onto the merged obstacle interval with the projection residuals
    recorded as reflection increments.
    """
    steps = lattice.steps
    if barriers.lattice.grid != lattice.grid:
        raise ValueError("obstacles live on a different grid")
    xi_norm = barriers.xi
    if xi is None:
        xi = xi_norm
    else:
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 0:
            xi = np.full(steps + 1, float(xi))
        if not np.array_equal(xi, xi_norm):
            raise ValueError(
                "xi differs from the obstacles' normalized terminal values"
            )

    bounds = driver.bounds
    y_levels = [None] * (steps + 1)
    y_levels[steps] = np.asarray(xi, dtype=float)
    z_slots = [None] * steps
    drift_slots = [None] * steps
    kp_slots = [None] * steps
    km_slots = [None] * steps
    fplus = 0.0
    fminus = 0.0
    defect = 0.0

    for j in range(steps - 1, -1, -1):
        nxt = y_levels[j + 1]
        E = expectation_level(nxt)
        Z = increment_level(nxt, lattice.sqrt_dt)
        t = lattice.times[j]
        base = E
        if driver.quad is not None:
            coef, center = driver.quad(j)
            base = base + _tilt_increment(coef, Z - center, lattice.sqrt_dt)
            f_drift = driver.f_rest
        else:
            f_drift = driver.f
        if driver.source is not None:
            base = base + np.broadcast_to(
                np.asarray(driver.source(j), dtype=float), E.shape
            )
        dA = bounds.A.atom(j) if bounds is not None else None
        y_raw = _implicit_core(
            base,
            Z,
            t,
            lattice.dt,
            level=j,
            f_drift=f_drift,
            g_fn=driver.g,
            dA=dA,
            penalty=driver.penalty,
        )
        low, high = effective_barriers(barriers, j)
        y = np.clip(y_raw, low, high)
        dkp = np.maximum(low - y_raw, 0.0)
        dkm = np.maximum(y_raw - high, 0.0)

        y_levels[j] = y
        z_slots[j] = Z
        drift_slots[j] = y_raw - E
        kp_slots[j] = dkp
        km_slots[j] = dkm
        # mask the gap before multiplying: 0 * inf is NaN otherwise
        gap_low = np.where(dkp > 0.0, y - low, 0.0)
        gap_high = np.where(dkm > 0.0, high - y, 0.0)
        fplus = max(fplus, float(np.max(dkp * gap_low, initial=0.0)))
        fminus = max(fminus, float(np.max(dkm * gap_high, initial=0.0)))
        defect = max(defect, float(np.max(dkp * dkm, initial=0.0)))

    return Solution(
        Y=AdaptedProcess(lattice, y_levels),
        Z=PredictableProcess(lattice, z_slots),
        Kplus=IncreasingProcess(lattice, kp_slots),
        Kminus=IncreasingProcess(lattice, km_slots),
        residuals=SkorokhodReport(fplus, fminus, defect),
        drift=PredictableProcess(lattice, drift_slots),
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Ordering consequences of one dominating/dominated solve pair.

    ``upper_envelope_ok`` / ``lower_envelope_ok``: the crossed obstacle
    hypotheses (small solution under the big problem's upper obstacle;
    big solution above the small problem's lower obstacle).
    ``drift_domination_ok``: the small solution's realized drift never
    exceeds the big generator's rate along the small solution.
    ``ordered``: big solution >= small solution at every node.
    ``kminus_ok``: where the effective upper obstacles coincide, the
    small problem's upper reflection increment never exceeds the big
    problem's.
    """

    upper_envelope_ok: bool
    lower_envelope_ok: bool
    drift_domination_ok: bool
    ordered: bool
    kminus_ok: bool
    max_order_violation: float
    max_kminus_violation: float
    max_drift_violation: float

    @property
    def hypotheses_ok(self):
        return (
            self.upper_envelope_ok
            and self.lower_envelope_ok
            and self.drift_domination_ok
        )

    @property
    def passed(self):
        return self.hypotheses_ok and self.ordered and self.kminus_ok


def comparison_check(
    sol_big, sol_small, driver_big, driver_small, bars_big, bars_small, tol=1e-9
):
    """Audit the ordering relations between two solves.

    The caller asserts that ``sol_big`` solves the problem meant to
    dominate.  The crossed obstacle and rate-domination hypotheses are
    audited first (report fields, not preconditions): both generators
    are evaluated at the small solution's realized state, never at
    different points.  Then the node-wise ordering of the solutions
    and of the upper reflection increments on the set where the
    effective upper obstacles agree.
    """
    lat = sol_big.lattice
    steps = lat.steps
    up_ok = True
    low_ok = True
    for i in range(steps):
        if np.any(sol_small.Y.level(i) > bars_big.U.level(i) + tol):
            up_ok = False
        if np.any(bars_small.L.level(i) > sol_big.Y.level(i) + tol):
            low_ok = False

    def rate(driver, j, t, y, z):
        out = np.asarray(driver.f(t, y, z), dtype=float) * lat.dt
        if driver.source is not None:
            out = out + np.asarray(driver.source(j), dtype=float)
        if driver.g is not None and driver.bounds is not None:
            dA = driver.bounds.A.atom(j)
            out = out + np.asarray(driver.g(t, y, y), dtype=float) * dA
        return out

    drift_ok = True
    max_drift = 0.0
    for j in range(steps):
        y = sol_small.Y.level(j)
        z = sol_small.Z.atom(j)
        t = lat.times[j]
        gap = float(
            np.max(
                rate(driver_small, j, t, y, z) - rate(driver_big, j, t, y, z),
                initial=-np.inf,
            )
        )
        max_drift = max(max_drift, gap)
        if gap > tol:
            drift_ok = False

    ordered = True
    max_order = 0.0
    for i in range(steps + 1):
        gap = float(
            np.max(sol_small.Y.level(i) - sol_big.Y.level(i), initial=-np.inf)
        )
        max_order = max(max_order, gap)
        if gap > tol:
            ordered = False

    kminus_ok = True
    max_km = 0.0
    for j in range(steps):
        _, high_big = effective_barriers(bars_big, j)
        _, high_small = effective_barriers(bars_small, j)
        same = high_big == high_small
        if not same.any():
            continue
        gap = float(
            np.max(
                (sol_small.Kminus.atom(j) - sol_big.Kminus.atom(j))[same],
                initial=-np.inf,
            )
        )
        max_km = max(max_km, gap)
        if gap > tol:
            kminus_ok = False

    return ComparisonReport(
        upper_envelope_ok=up_ok,
        lower_envelope_ok=low_ok,
        drift_domination_ok=drift_ok,
        ordered=ordered,
        kminus_ok=kminus_ok,
        max_order_violation=max(max_order, 0.0),
        max_kminus_violation=max(max_km, 0.0),
        max_drift_violation=max(max_drift, 0.0),
    )


def budget_defect(sol):
    """Largest per-path defect of the telescoped backward identity.

    Along every path, the terminal value minus the root value must
    equal the sum of slope-times-increment minus realized drift minus
    lower reflection plus upper reflection.  Exact on paper; the
    return value is the floating-point accumulation, maximized over
    every path.
    """
    lat = sol.lattice
    steps = lat.steps
    paths = all_paths(steps)
    n_paths = paths.shape[0]
    nodes = np.zeros((n_paths, steps + 1), dtype=np.int64)
    np.cumsum(paths, axis=1, out=nodes[:, 1:])
    acc = np.full(n_paths, sol.Y.level(0)[0])
    for j in range(steps):
        idx = nodes[:, j]
        db = (2.0 * paths[:, j] - 1.0) * lat.sqrt_dt
        acc += (
            sol.Z.atom(j)[idx] * db
            - sol.drift.atom(j)[idx]
            - sol.Kplus.atom(j)[idx]
            + sol.Kminus.atom(j)[idx]
        )
    terminal = sol.Y.terminal()[nodes[:, steps]]
    return float(np.max(np.abs(terminal - acc)))
