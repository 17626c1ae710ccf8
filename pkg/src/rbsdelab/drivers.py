"""Generators, their growth data, and the dominating generator.

A generator is a pair of rate functions: ``f(t, y, z)`` integrated
against time, and ``g(t, y_left, y)`` integrated against an increasing
clock.  Alongside the analytic form, a generator may carry structural
hints the backward solver exploits:

- ``quad``: a squared-slope component ``q * (z - center)**2``, stepped
  by its exact one-step exponential average instead of an Euler term
  (this is what makes pure squared-slope generators land on their
  log-expectation closed form to machine precision);
- ``source``: a per-node increment independent of the unknown (bounded
  variation and clock terms of the penalized equations);
- ``penalty``: a per-node increment, nonincreasing in the unknown, for
  constraint penalties.

Growth data consists of node-indexed processes bounding the generator
(slope-quadratic bound for ``f``, flat bound for ``g``) plus the clock,
and is consumed by two things: the sampling audit, and the construction
of the dominating generator whose drift beats every generator within
the declared bounds after recentering the slope.
"""

from dataclasses import dataclass, replace

import numpy as np

from .barriers import dom_membership
from .lattice import (
    AdaptedProcess,
    IncreasingProcess,
    PredictableProcess,
    _frozen,
)

__all__ = [
    "InconsistentSemimartingale",
    "NonMonotonePhi",
    "GrowthBounds",
    "SemimartingaleSpec",
    "Driver",
    "AuditReport",
    "running_max_envelope",
    "dominate_growth",
    "build_dominated_driver",
    "audit_assumptions",
]


class InconsistentSemimartingale(Exception):
    """Decomposition data does not define a process on the lattice."""

    def __init__(self, level, node, gap):
        self.level = int(level)
        self.node = int(node)
        self.gap = float(gap)
        super().__init__(
            f"up and down reconstructions disagree by {self.gap!r} at "
            f"(level {self.level}, node {self.node}); the decomposition "
            f"does not recombine"
        )


class NonMonotonePhi(Exception):
    """Scaling function decreased between two probe points."""


def _as_adapted(lattice, x):
    if isinstance(x, AdaptedProcess):
        return x
    return AdaptedProcess.constant(lattice, float(x))


def _level_of(lattice, t):
    lvl = int(round(float(t) / lattice.dt))
    if not 0 <= lvl <= lattice.steps or abs(
        lattice.times[lvl] - float(t)
    ) > 1e-9 * max(1.0, lattice.grid.horizon):
        raise ValueError(f"{t!r} is not a grid time")
    return lvl


class GrowthBounds:
    """Node-indexed domination data for a generator.

    ``eta + C * z**2`` bounds ``|f|`` (with the first argument clamped
    between the node obstacles), ``beta`` bounds ``|g|``, and ``A`` is
    the clock ``g`` integrates against.  ``phi`` optionally records the
    nondecreasing rescaling the bounds were built with.
    """

    __slots__ = ("lattice", "eta", "C", "beta", "A", "phi")

    def __init__(self, eta, C, beta, A=None, phi=None):
        lattice = eta.lattice
        self.lattice = lattice
        self.eta = eta
        self.C = _as_adapted(lattice, C)
        self.beta = _as_adapted(lattice, beta)
        self.A = A if A is not None else IncreasingProcess.zero(lattice)
        self.phi = phi
        for name in ("eta", "C", "beta"):
            proc = getattr(self, name)
            for i, lv in enumerate(proc.levels):
                if np.any(lv < 0.0) or not np.all(np.isfinite(lv)):
                    raise ValueError(
                        f"{name} must be finite and >= 0 (level {i})"
                    )

    @classmethod
    def constants(cls, lattice, eta, C, beta=0.0, A=None, phi=None):
        return cls(
            AdaptedProcess.constant(lattice, eta),
            AdaptedProcess.constant(lattice, C),
            AdaptedProcess.constant(lattice, beta),
            A=A,
            phi=phi,
        )

    def __repr__(self):
        return f"GrowthBounds(steps={self.lattice.steps})"


class SemimartingaleSpec:
    """Decomposition of a candidate process: start value, two
    nondecreasing parts (added, subtracted), and the slope of its
    martingale part.

    ``reconstruct`` rebuilds the process forward and verifies that the
    up/down increments recombine, so the data actually defines a
    node-indexed process.
    """

    __slots__ = ("s0", "vplus", "vminus", "gamma")

    def __init__(self, s0, vplus, vminus, gamma):
        if not (
            isinstance(vplus, IncreasingProcess)
            and isinstance(vminus, IncreasingProcess)
            and isinstance(gamma, PredictableProcess)
        ):
            raise TypeError("vplus/vminus must be clocks, gamma predictable")
        if vplus.lattice.grid != gamma.lattice.grid or (
            vminus.lattice.grid != gamma.lattice.grid
        ):
            raise ValueError("decomposition pieces on different grids")
        self.s0 = float(s0)
        self.vplus = vplus
        self.vminus = vminus
        self.gamma = gamma

    @property
    def lattice(self):
        return self.gamma.lattice

    def reconstruct(self, tol=1e-9):
        """Forward-build the process ``s0 - vplus + vminus + slope part``.

        Raises :class:`InconsistentSemimartingale` when a node is
        reachable with two different values (the data does not live on
        the recombining lattice).
        """
        lat = self.lattice
        levels = [np.array([self.s0])]
        for i in range(lat.steps):
            cur = levels[i]
            drift = self.vminus.atom(i) - self.vplus.atom(i)
            g = self.gamma.atom(i) * lat.sqrt_dt
            down = cur + drift - g
            up = cur + drift + g
            nxt = np.empty(i + 2)
            nxt[: i + 1] = down
            nxt[i + 1] = up[i]
            gap = np.abs(nxt[1 : i + 1] - up[: i])
            if gap.size and gap.max() > tol * max(1.0, np.abs(nxt).max()):
                node = int(np.argmax(gap)) + 1
                raise InconsistentSemimartingale(i + 1, node, gap.max() if gap.size else 0.0)
            levels.append(nxt)
        return AdaptedProcess(lat, levels)

    def __repr__(self):
        return (
            f"SemimartingaleSpec(s0={self.s0!r}, "
            f"steps={self.lattice.steps})"
        )


@dataclass(frozen=True)
class Driver:
    """Generator of the backward equation.

    ``f(t, y, z)`` must accept a scalar time and equal-shape arrays and
    return a broadcastable array; same for ``g(t, y_left, y)``.  The
    optional structural fields are described in the module docstring;
    when ``quad`` is given, ``f_rest`` must hold the remainder so that
    ``f == f_rest + q * (z - center)**2`` at every node.
    """

    f: object
    g: object = None
    bounds: object = None
    quad: object = None
    f_rest: object = None
    source: object = None
    penalty: object = None
    label: str = "custom"

    def __post_init__(self):
        if self.quad is not None and self.f_rest is None:
            raise ValueError(
                "a driver with an exact squared-slope part must also "
                "supply f_rest (the remainder of f)"
            )

    @classmethod
    def zero(cls):
        return cls(f=lambda t, y, z: np.zeros_like(y), label="zero")

    @classmethod
    def constant(cls, value, **kw):
        value = float(value)
        return cls(
            f=lambda t, y, z: np.full_like(y, value),
            label=f"constant({value!r})",
            **kw,
        )

    @classmethod
    def linear(cls, a, b, c, **kw):
        """Rate ``a*y + b*z + c``."""
        a, b, c = float(a), float(b), float(c)
        return cls(
            f=lambda t, y, z: a * y + b * z + c,
            label=f"linear({a!r},{b!r},{c!r})",
            **kw,
        )

    @classmethod
    def quadratic(cls, c, **kw):
        """Rate ``c * z**2``, stepped exactly via its exponential average."""
        c = float(c)
        return cls(
            f=lambda t, y, z: c * z * z,
            quad=lambda level: (c, 0.0),
            f_rest=lambda t, y, z: np.zeros_like(y),
            label=f"quadratic({c!r})",
            **kw,
        )

    @classmethod
    def tabulated(cls, lattice, values, **kw):
        """Per-node rate table, independent of the unknown and the slope."""
        table = [_frozen(np.asarray(v, dtype=float)) for v in values]

        def f(t, y, z):
            return np.broadcast_to(table[_level_of(lattice, t)], y.shape)

        return cls(f=f, label="tabulated", **kw)

    def with_bounds(self, bounds):
        return replace(self, bounds=bounds)

    def __repr__(self):
        return f"Driver({self.label})"


def running_max_envelope(X):
    """Tightest node-indexed process dominating the running maximum.

    Forward recursion: a node's value is its own sample joined with the
    values at both parents.  Along every path this dominates the
    pathwise running maximum of ``X`` (paths through a node may differ
    in their history, so a node-indexed majorant cannot do better) and
    it is nondecreasing along every path.
    """
    levels = [X.level(0).copy()]
    for i in range(X.lattice.steps):
        prev = levels[i]
        nxt = np.asarray(X.level(i + 1), dtype=float).copy()
        nxt[: i + 1] = np.maximum(nxt[: i + 1], prev)
        nxt[1:] = np.maximum(nxt[1:], prev)
        levels.append(nxt)
    return AdaptedProcess(X.lattice, levels)


def _probe_monotone(phi, samples):
    xs = np.unique(np.asarray(samples, dtype=float))
    if xs.size < 2:
        return
    vals = np.asarray(phi(xs), dtype=float)
    drops = np.where(np.diff(vals) < 0.0)[0]
    if drops.size:
        k = int(drops[0])
        raise NonMonotonePhi(
            f"scaling function decreases between {xs[k]!r} and {xs[k + 1]!r}"
        )


def dominate_growth(phi, eta_tilde, C_tilde, eta_hat, L, U, A=None):
    """Rescale raw growth data by the running size of the obstacles.

    The scale process is twice the running maximum (node envelope) of
    the positive part of ``U`` plus the negative part of ``L``; the raw
    bounds are multiplied by ``phi`` of that scale.  ``phi`` must be
    nondecreasing (probed, not proved).
    """
    lattice = L.lattice
    size = AdaptedProcess(
        lattice,
        [
            2.0 * (np.maximum(U.level(i), 0.0) + np.maximum(-L.level(i), 0.0))
            for i in range(lattice.steps + 1)
        ],
    )
    D = running_max_envelope(size)
    probe_pts = np.concatenate([lv for lv in D.levels])
    probe_pts = probe_pts[np.isfinite(probe_pts)]
    # realized sizes may all coincide; spread the probe over [0, max]
    if probe_pts.size:
        probe_pts = np.concatenate(
            [probe_pts, np.linspace(0.0, float(probe_pts.max()), 17)]
        )
    _probe_monotone(phi, probe_pts)

    eta_tilde = _as_adapted(lattice, eta_tilde)
    C_tilde = _as_adapted(lattice, C_tilde)
    eta_hat = _as_adapted(lattice, eta_hat)

    def scaled(proc):
        return AdaptedProcess(
            lattice,
            [
                np.asarray(phi(D.level(i)), dtype=float) * proc.level(i)
                for i in range(lattice.steps + 1)
            ],
        )

    return GrowthBounds(
        scaled(eta_tilde), scaled(C_tilde), scaled(eta_hat), A=A, phi=phi
    )


def build_dominated_driver(bounds, spec, orientation=1):
    """Generator of the one-sided penalized equations, without the penalty.

    Drift rate ``eta + 4*C*gamma**2 + (m/2)*(z - gamma)**2`` with ``m``
    one plus eight times the running maximum (node envelope) of ``|C|``,
    plus the per-step increments of both bounded-variation parts of the
    witness and the clock term ``beta * dA``.  ``orientation=+1`` gives
    the downward-pushing equation solved below the upper obstacle;
    ``orientation=-1`` flips every sign for the mirror equation.  The
    squared-slope part is declared exact (see the module docstring), so
    the one-sided solves stay monotone at any step size.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    lattice = bounds.lattice
    if spec.lattice.grid != lattice.grid:
        raise ValueError("bounds and witness decomposition on different grids")
    absC = AdaptedProcess(
        lattice,
        [np.abs(bounds.C.level(i)) for i in range(lattice.steps + 1)],
    )
    env = running_max_envelope(absC)
    # m >= 8*sup|C| makes (m/2)(z-g)^2 + 4*C*g^2 dominate C*z^2 pointwise
    m = AdaptedProcess(
        lattice,
        [1.0 + 8.0 * env.level(i) for i in range(lattice.steps + 1)],
    )
    sgn = float(orientation)

    def f(t, y, z):
        lvl = _level_of(lattice, t)
        g = spec.gamma.atom(lvl)
        base = (
            bounds.eta.level(lvl)
            + 4.0 * bounds.C.level(lvl) * g * g
            + 0.5 * m.level(lvl) * (z - g) ** 2
        )
        return sgn * base

    def f_rest(t, y, z):
        lvl = _level_of(lattice, t)
        g = spec.gamma.atom(lvl)
        return sgn * (
            bounds.eta.level(lvl) + 4.0 * bounds.C.level(lvl) * g * g
        ) * np.ones_like(y)

    def quad(level):
        return sgn * 0.5 * m.level(level), spec.gamma.atom(level)

    def source(level):
        dv = spec.vplus.atom(level) + spec.vminus.atom(level)
        return sgn * (
            dv + bounds.beta.level(level) * bounds.A.atom(level)
        )

    return Driver(
        f=f,
        g=None,
        bounds=bounds,
        quad=quad,
        f_rest=f_rest,
        source=source,
        label=f"dominated(orientation={orientation:+d})",
    )


@dataclass
class AuditReport:
    """Outcome of the sampling audit of a generator's declared bounds."""

    probes: int
    drift_bound_failures: list
    clock_bound_failures: list
    monotonicity_failures: list
    witness_in_domain: object  # True / False / None when not checked

    @property
    def passed(self):
        return (
            not self.drift_bound_failures
            and not self.clock_bound_failures
            and not self.monotonicity_failures
            and self.witness_in_domain is not False
        )

    def summary(self):
        w = (
            "skipped"
            if self.witness_in_domain is None
            else ("ok" if self.witness_in_domain else "FAIL")
        )
        return (
            f"probes={self.probes} "
            f"drift_bound_failures={len(self.drift_bound_failures)} "
            f"clock_bound_failures={len(self.clock_bound_failures)} "
            f"monotonicity_failures={len(self.monotonicity_failures)} "
            f"witness={w}"
        )


def audit_assumptions(driver, barriers=None, spec=None, probes=1000, seed=0):
    """Falsification pass over a generator's declared growth data.

    Samples random (time, node, y, z) tuples with log-spaced magnitudes
    up to 1e3 and records every probe where the drift rate escapes its
    slope-quadratic bound (first argument clamped between the node
    obstacles when given), where the clock rate escapes its flat bound,
    or where ``y -> y + g(t, y, y) * dA`` decreases.  When both a
    witness decomposition and obstacles are supplied, membership of the
    reconstructed witness is checked too.  Sampling can only falsify.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    bounds = driver.bounds
    rng = np.random.default_rng(seed)
    drift_fail, clock_fail, mono_fail = [], [], []
    if bounds is not None:
        lattice = bounds.lattice
        lv = rng.integers(0, lattice.steps, size=probes)
        mag_y = 10.0 ** rng.uniform(-3.0, 3.0, size=probes)
        mag_z = 10.0 ** rng.uniform(-3.0, 3.0, size=probes)
        ys = np.where(rng.random(probes) < 0.5, -mag_y, mag_y)
        zs = np.where(rng.random(probes) < 0.5, -mag_z, mag_z)
        for k in range(probes):
            i = int(lv[k])
            node = int(rng.integers(0, i + 1))
            t = lattice.times[i]
            y = ys[k]
            if barriers is not None:
                y = min(
                    max(y, barriers.L.level(i)[node]),
                    barriers.U.level(i)[node],
                )
            z = zs[k]
            yv = np.array([y])
            zv = np.array([z])
            cap = (
                bounds.eta.level(i)[node]
                + bounds.C.level(i)[node] * z * z
            )
            fv = float(np.asarray(driver.f(t, yv, zv)).ravel()[0])
            if not np.isfinite(fv) or abs(fv) > cap * (1.0 + 1e-12) + 1e-12:
                drift_fail.append((i, node, y, z, fv, cap))
            if driver.g is not None:
                gv = float(np.asarray(driver.g(t, yv, yv)).ravel()[0])
                bcap = bounds.beta.level(i)[node]
                if not np.isfinite(gv) or abs(gv) > bcap * (1.0 + 1e-12) + 1e-12:
                    clock_fail.append((i, node, y, gv, bcap))
                if i < lattice.steps:
                    dA = bounds.A.atom(i)[node]
                    if dA > 0.0:
                        y2 = y + 10.0 ** rng.uniform(-6.0, 0.0)
                        g2 = float(
                            np.asarray(
                                driver.g(t, np.array([y2]), np.array([y2]))
                            ).ravel()[0]
                        )
                        if y2 + g2 * dA < y + gv * dA - 1e-9:
                            mono_fail.append((i, node, y, y2, dA))
    witness = None
    if spec is not None and barriers is not None:
        witness = dom_membership(spec.reconstruct(), barriers)
    return AuditReport(
        probes=probes,
        drift_bound_failures=drift_fail,
        clock_bound_failures=clock_fail,
        monotonicity_failures=mono_fail,
        witness_in_domain=witness,
    )
