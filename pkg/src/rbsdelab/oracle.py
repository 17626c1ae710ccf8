"""Brute-force reference values for the fast code paths.

Everything here is deliberately naive: stopping problems are solved by
enumerating every marking of the tree's interior nodes, games by
enumerating every pair of markings, envelopes by a quadratic rescan,
and the pure-quadratic-driver value by its log-sum-exp closed form.
The only imports are the lattice containers, so these references share
no logic with the solvers they are used to check.

Enumeration is exponential in the square of the depth, hence the hard
caps: a depth-5 tree already has 2^15 stopping rules and a depth-4
game 2^20 rule pairs.
"""

import math

import numpy as np
from scipy.special import logsumexp

from .lattice import AdaptedProcess, all_paths, path_nodes

__all__ = [
    "DepthTooLarge",
    "NoValue",
    "StoppingRule",
    "stopping_rule_value",
    "exhaustive_stopping_value",
    "exhaustive_dynkin_value",
    "quadratic_closed_form",
    "envelope_brute_force",
]

# 2^21 rule bitmasks is the largest enumeration we allow
_MAX_RULE_BITS = 21


class DepthTooLarge(Exception):
    """Tree too deep for exhaustive enumeration."""


class NoValue(Exception):
    """The enumerated game's two one-sided optima disagree.

    Carries both optima so callers can log and skip the instance.
    """

    def __init__(self, maxmin, minmax):
        self.maxmin = float(maxmin)
        self.minmax = float(minmax)
        super().__init__(
            f"game has no value at this depth: "
            f"maxmin {self.maxmin!r} != minmax {self.minmax!r}"
        )


class StoppingRule:
    """Marking of interior nodes; stop at the first marked node.

    ``marks[i]`` is a boolean array over the ``i + 1`` nodes of level
    ``i`` for ``0 <= i < steps``; stopping at the terminal level is
    forced.  Any marking is legal: nodes shadowed by an earlier mark
    are simply never reached.
    """

    __slots__ = ("marks",)

    def __init__(self, marks):
        self.marks = tuple(
            np.asarray(m, dtype=bool).copy() for m in marks
        )
        for i, m in enumerate(self.marks):
            if m.shape != (i + 1,):
                raise ValueError(
                    f"level {i} marking must have shape ({i + 1},)"
                )

    @classmethod
    def from_bitmask(cls, steps, mask):
        """Decode a rule from ``mask``'s bits, level by level, low bits first."""
        marks = []
        k = 0
        for i in range(steps):
            row = np.zeros(i + 1, dtype=bool)
            for j in range(i + 1):
                row[j] = (mask >> k) & 1
                k += 1
            marks.append(row)
        return cls(marks)

    def stop_level(self, ups):
        """First marked level along the path, or ``len(ups)`` if none."""
        nodes = path_nodes(ups)
        for i, m in enumerate(self.marks):
            if m[nodes[i]]:
                return i
        return len(ups)


def _flat_node_index(steps):
    """Per-path flat interior-node indices, shape (2^steps, steps).

    Interior node (i, j) gets flat index i(i+1)/2 + j; entry (p, i) is
    the flat index of the node path ``p`` occupies at level ``i``.
    """
    paths = all_paths(steps)
    nodes = np.concatenate(
        [
            np.zeros((paths.shape[0], 1), dtype=np.int64),
            np.cumsum(paths, axis=1, dtype=np.int64),
        ],
        axis=1,
    )[:, :steps]
    base = (np.arange(steps, dtype=np.int64) * (np.arange(steps) + 1)) // 2
    return base[None, :] + nodes, paths


def _payoff_matrix(process_levels, xi, paths):
    """Payoff-if-stopped-at-level matrix, shape (paths, steps + 1)."""
    steps = paths.shape[1]
    nodes = np.concatenate(
        [
            np.zeros((paths.shape[0], 1), dtype=np.int64),
            np.cumsum(paths, axis=1, dtype=np.int64),
        ],
        axis=1,
    )
    cols = [process_levels[i][nodes[:, i]] for i in range(steps)]
    cols.append(np.asarray(xi, dtype=float)[nodes[:, steps]])
    return np.stack(cols, axis=1)


def _first_stop_levels(flat, n_rules, chunk=None):
    """First marked level per (rule, path) for rules 0..n_rules-1.

    Yields ``(rule_offset, stop_levels)`` blocks, ``stop_levels`` of
    shape (block, paths) with value ``steps`` when a rule never marks
    the path.
    """
    n_paths, steps = flat.shape
    if chunk is None:
        chunk = max(1, 2 ** 22 // max(1, n_paths * (steps + 1)))
    for lo in range(0, n_rules, chunk):
        rules = np.arange(lo, min(lo + chunk, n_rules), dtype=np.int64)
        marked = ((rules[:, None, None] >> flat[None, :, :]) & 1).astype(
            bool
        )
        forced = np.ones(marked.shape[:2] + (1,), dtype=bool)
        stop = np.argmax(
            np.concatenate([marked, forced], axis=2), axis=2
        )
        yield lo, stop


def _interior_bits(steps, max_depth, cap):
    if steps > max_depth:
        raise DepthTooLarge(
            f"depth {steps} exceeds the enumeration cap {max_depth}"
        )
    bits = steps * (steps + 1) // 2
    if bits > cap:
        raise DepthTooLarge(
            f"{bits} interior nodes exceed the {cap}-bit rule cap"
        )
    return bits


def stopping_rule_value(L, xi, rule):
    """Expected payoff of one explicit rule: stop payoff from ``L``,
    terminal payoff ``xi`` when the rule never fires."""
    steps = L.lattice.steps
    paths = all_paths(steps)
    pay = _payoff_matrix(L.levels, xi, paths)
    total = 0.0
    for p in range(paths.shape[0]):
        total += pay[p, rule.stop_level(paths[p])]
    return total / paths.shape[0]


def exhaustive_stopping_value(L, xi, max_depth=5):
    """Best expected stopped payoff over every stopping rule.

    ``L`` gives the payoff when stopping before the end, ``xi`` the
    forced terminal payoff.  Enumerates all 2^(interior nodes)
    markings; raises :class:`DepthTooLarge` beyond the cap.
    """
    if not isinstance(L, AdaptedProcess):
        raise TypeError("L must be an AdaptedProcess")
    steps = L.lattice.steps
    bits = _interior_bits(steps, max_depth, _MAX_RULE_BITS)
    flat, paths = _flat_node_index(steps)
    pay = _payoff_matrix(L.levels, xi, paths)
    n_paths = paths.shape[0]
    best = -np.inf
    for _, stop in _first_stop_levels(flat, 2 ** bits):
        vals = np.take_along_axis(
            pay[None, :, :], stop[:, :, None], axis=2
        )[:, :, 0].sum(axis=1) / n_paths
        m = float(vals.max())
        if m > best:
            best = m
    return best


def exhaustive_dynkin_value(L, U, xi, max_depth=4, tol=1e-12):
    """Value of the two-player stopping game, by full enumeration.

    One player stops to collect ``L`` (and wants the value high), the
    other stops to pay ``U`` (and wants it low); simultaneous stops pay
    ``L``, and if nobody stops the terminal payoff is ``xi``.  Returns
    the common value of the two one-sided optima; raises
    :class:`NoValue` (with both optima attached) when they differ by
    more than ``tol``, and :class:`DepthTooLarge` beyond the caps.
    """
    steps = L.lattice.steps
    if U.lattice.grid != L.lattice.grid:
        raise ValueError("L and U live on different grids")
    bits = _interior_bits(steps, max_depth, _MAX_RULE_BITS // 2)
    flat, paths = _flat_node_index(steps)
    pay_low = _payoff_matrix(L.levels, xi, paths)
    pay_high = _payoff_matrix(U.levels, xi, paths)
    n_paths = paths.shape[0]
    n_rules = 2 ** bits

    # cache every rule's stop levels and its stopped payoffs per path
    stop_all = np.empty((n_rules, n_paths), dtype=np.int64)
    for lo, stop in _first_stop_levels(flat, n_rules):
        stop_all[lo : lo + stop.shape[0]] = stop
    path_ids = np.arange(n_paths)[None, :]
    low_at_stop = pay_low[path_ids, stop_all]
    high_at_stop = pay_high[path_ids, stop_all]

    maxmin = -np.inf
    running_max = np.full(n_rules, -np.inf)
    chunk = max(1, 2 ** 24 // (n_rules * n_paths))
    for lo in range(0, n_rules, chunk):
        hi = min(lo + chunk, n_rules)
        stopper_first = (
            stop_all[lo:hi, None, :] <= stop_all[None, :, :]
        )
        J = np.where(
            stopper_first,
            low_at_stop[lo:hi, None, :],
            high_at_stop[None, :, :],
        ).sum(axis=2) / n_paths
        maxmin = max(maxmin, float(J.min(axis=1).max()))
        np.maximum(running_max, J.max(axis=0), out=running_max)
    minmax = float(running_max.min())
    if abs(maxmin - minmax) > tol:
        raise NoValue(maxmin, minmax)
    return maxmin


def quadratic_closed_form(c, xi):
    """Exact lattice value of the driver ``c * z**2`` with payoff ``xi``.

    The exponential change of variable turns the backward recursion
    into a plain expectation, giving ``ln E[exp(2c xi)] / (2c)`` with
    the binomial terminal weights.  Computed in log space so large
    ``c * xi`` cannot overflow.  Requires ``c > 0``.
    """
    c = float(c)
    if not c > 0.0:
        raise ValueError("c must be > 0")
    xi = np.asarray(xi, dtype=float)
    n = xi.size - 1
    logw = np.array(
        [math.log(math.comb(n, j)) for j in range(n + 1)]
    ) - n * math.log(2.0)
    return float(logsumexp(2.0 * c * xi + logw) / (2.0 * c))


def envelope_brute_force(times, g, weights, n):
    """Quadratic rescan of the penalized envelope, plus its left variant.

    For every grid index the maximum of ``g(s) - n (t - s)`` is
    recomputed from scratch over the atoms ``s <= t`` (strictly before
    ``t`` for the left variant); -inf over an empty set.
    """
    t = np.asarray(times, dtype=float)
    gv = np.asarray(g, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = float(n)
    values = np.full_like(t, -np.inf)
    left = np.full_like(t, -np.inf)
    for k in range(t.size):
        cand = np.where(
            w[: k + 1] > 0.0, gv[: k + 1] - n * (t[k] - t[: k + 1]), -np.inf
        )
        values[k] = cand.max(initial=-np.inf)
        left[k] = cand[:k].max(initial=-np.inf)
    return values, left
