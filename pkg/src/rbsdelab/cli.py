"""Command line front end: scenario files in, CSV artifacts out.

A scenario is a single JSON document with a versioned ``schema`` field;
unknown keys anywhere in it are errors.  Each invocation runs one
subcommand against one scenario and writes its artifacts plus a run
manifest (config hash, package versions, timings) into the output
directory.  All randomness flows through the explicit seed, and floats
are serialized via ``repr``, so identical config and seed produce
byte-identical CSV files.

Exit codes: 0 success, 1 configuration error, 2 infeasible obstacles,
3 numerical failure (divergence, non-finite generator, exhausted
penalty schedule, or a failed verification suite).
"""

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .barriers import (
    BarrierSet,
    InfeasibleBarriers,
    effective_barriers,
    envelope_profile,
    envelope_star_profile,
)
from .drivers import (
    Driver,
    GrowthBounds,
    InconsistentSemimartingale,
    SemimartingaleSpec,
)
from .lattice import (
    AdaptedProcess,
    IncreasingProcess,
    Lattice,
    PredictableProcess,
    TimeGrid,
)
from .penalize import (
    DEFAULT_SCHEDULE,
    SandwichViolation,
    ScheduleExhausted,
    build_family,
    reduce_and_solve,
)
from .snell import HypothesisAViolated, SnellInstance, snell_envelope
from .solver import (
    ImplicitStepDivergence,
    NonFiniteDriver,
    solve_rbsde,
)
from .verify import run_all

__all__ = ["ConfigError", "main", "entry"]

_SCHEMA = 1
_ENVELOPE_WEIGHTS = (1.0, 4.0, 16.0, 64.0, 256.0)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    """The scenario document cannot be used as given."""


# ------------------------------------------------------------- config walk


def _check_keys(mapping, allowed, path):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} under {path or 'the top level'} "
                f"(allowed: {', '.join(sorted(allowed))})"
            )


def _number(cfg, key, path, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}.{key} is required")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number")
    return float(v)


def _integer(cfg, key, path, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}.{key} is required")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key} must be an integer")
    return v


def load_config(path):
    """Read and schema-check one scenario document."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    _check_keys(
        cfg,
        {
            "schema",
            "seed",
            "grid",
            "driver",
            "bounds",
            "barriers",
            "measures",
            "witness",
            "terminal",
            "penalization",
            "outputs",
        },
        "",
    )
    schema = _integer(cfg, "schema", "config", required=True)
    if schema != _SCHEMA:
        raise ConfigError(
            f"unsupported schema {schema!r} (this build reads {_SCHEMA})"
        )
    return cfg, text.encode()


# -------------------------------------------------------------- evaluators


def _build_lattice(cfg):
    grid = cfg.get("grid")
    if grid is None:
        raise ConfigError("grid is required")
    _check_keys(grid, {"T", "steps"}, "grid")
    horizon = _number(grid, "T", "grid", required=True)
    steps = _integer(grid, "steps", "grid", required=True)
    try:
        return Lattice(TimeGrid(horizon, steps))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _shape_levels(node, lat, path):
    """Evaluate one obstacle generator to per-level arrays."""
    _check_keys(
        node,
        {"kind", "value", "levels", "values", "form", "strike", "sin",
         "freq", "linear", "time", "offset"},
        path,
    )
    kind = node.get("kind")
    if kind == "constant":
        v = _number(node, "value", path, required=True)
        return [np.full(i + 1, v) for i in range(lat.steps + 1)]
    if kind == "table":
        levels = node.get("levels")
        if levels is None:
            raise ConfigError(f"{path}.levels is required for a table")
        if len(levels) != lat.steps + 1:
            raise ConfigError(
                f"{path}.levels needs {lat.steps + 1} rows, got {len(levels)}"
            )
        out = []
        for i, row in enumerate(levels):
            arr = np.asarray(row, dtype=float)
            if arr.shape != (i + 1,):
                raise ConfigError(
                    f"{path}.levels[{i}] needs {i + 1} entries"
                )
            out.append(arr)
        return out
    if kind == "payoff":
        form = node.get("form")
        strike = _number(node, "strike", path, required=True)
        if form == "put":
            return [
                np.maximum(strike - np.exp(lat.brownian(i)), 0.0)
                for i in range(lat.steps + 1)
            ]
        if form == "call":
            return [
                np.maximum(np.exp(lat.brownian(i)) - strike, 0.0)
                for i in range(lat.steps + 1)
            ]
        raise ConfigError(f"{path}.form must be 'put' or 'call'")
    if kind == "shape":
        a = _number(node, "sin", path, default=0.0)
        w = _number(node, "freq", path, default=1.0)
        b = _number(node, "linear", path, default=0.0)
        c = _number(node, "time", path, default=0.0)
        d = _number(node, "offset", path, default=0.0)
        return [
            a * np.sin(w * lat.brownian(i)) + b * lat.brownian(i)
            + c * lat.times[i] + d
            for i in range(lat.steps + 1)
        ]
    raise ConfigError(
        f"{path}.kind must be one of constant, table, payoff, shape"
    )


def _terminal_values(cfg, lat, witness_levels):
    node = cfg.get("terminal")
    if node is None:
        if witness_levels is not None:
            return np.asarray(witness_levels[lat.steps], dtype=float)
        raise ConfigError("terminal is required when no witness is given")
    if isinstance(node, dict) and node.get("kind") == "table" and "values" in node:
        _check_keys(node, {"kind", "values"}, "terminal")
        arr = np.asarray(node["values"], dtype=float)
        if arr.shape != (lat.steps + 1,):
            raise ConfigError(
                f"terminal.values needs {lat.steps + 1} entries"
            )
        return arr
    return _shape_levels(node, lat, "terminal")[lat.steps]


def _atom_list_predictable(entries, lat, path, fill):
    slots = [np.full(i + 1, fill) for i in range(lat.steps)]
    if entries is None:
        return None
    if not isinstance(entries, list):
        raise ConfigError(f"{path} must be a list of atoms")
    for idx, entry in enumerate(entries):
        _check_keys(entry, {"time", "value", "values"}, f"{path}[{idx}]")
        k = _integer(entry, "time", f"{path}[{idx}]", required=True)
        if not 1 <= k <= lat.steps:
            raise ConfigError(
                f"{path}[{idx}].time {k} outside [1, {lat.steps}]"
            )
        if "values" in entry:
            arr = np.asarray(entry["values"], dtype=float)
            if arr.shape != (k,):
                raise ConfigError(
                    f"{path}[{idx}].values needs {k} entries "
                    f"(one per node of level {k - 1})"
                )
            slots[k - 1] = arr
        else:
            v = _number(entry, "value", f"{path}[{idx}]", required=True)
            slots[k - 1] = np.full(k, v)
    return PredictableProcess(lat, slots)


def _clock(entries, lat, path):
    if entries is None:
        return None
    if entries == "lebesgue":
        return IncreasingProcess.lebesgue(lat)
    if not isinstance(entries, list):
        raise ConfigError(f"{path} must be a list of atoms or 'lebesgue'")
    pairs = {}
    for idx, entry in enumerate(entries):
        _check_keys(entry, {"time", "mass"}, f"{path}[{idx}]")
        k = _integer(entry, "time", f"{path}[{idx}]", required=True)
        mass = _number(entry, "mass", f"{path}[{idx}]", required=True)
        if k in pairs:
            raise ConfigError(f"{path}[{idx}] repeats time {k}")
        pairs[k] = mass
    try:
        return IncreasingProcess.from_time_atoms(lat, pairs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_driver(cfg, lat, bounds):
    node = cfg.get("driver")
    if node is None:
        return Driver.zero().with_bounds(bounds) if bounds else Driver.zero()
    _check_keys(node, {"name", "params"}, "driver")
    name = node.get("name")
    params = node.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("driver.params must be an object")
    extra = {"bounds": bounds} if bounds is not None else {}
    try:
        if name == "zero":
            _check_keys(params, set(), "driver.params")
            drv = Driver.zero()
            return drv.with_bounds(bounds) if bounds else drv
        if name == "constant":
            _check_keys(params, {"value"}, "driver.params")
            return Driver.constant(
                _number(params, "value", "driver.params", required=True),
                **extra,
            )
        if name == "linear":
            _check_keys(params, {"a", "b", "c"}, "driver.params")
            return Driver.linear(
                _number(params, "a", "driver.params", default=0.0),
                _number(params, "b", "driver.params", default=0.0),
                _number(params, "c", "driver.params", default=0.0),
                **extra,
            )
        if name == "quadratic":
            _check_keys(params, {"c"}, "driver.params")
            return Driver.quadratic(
                _number(params, "c", "driver.params", required=True),
                **extra,
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"driver: {exc}") from exc
    raise ConfigError(
        f"driver.name {name!r} not in the catalog "
        f"(zero, constant, linear, quadratic)"
    )


def _build_bounds(cfg, lat, A):
    node = cfg.get("bounds")
    if node is None:
        return None
    _check_keys(node, {"eta", "C", "beta"}, "bounds")
    try:
        return GrowthBounds.constants(
            lat,
            eta=_number(node, "eta", "bounds", required=True),
            C=_number(node, "C", "bounds", required=True),
            beta=_number(node, "beta", "bounds", default=0.0),
            A=A,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bounds: {exc}") from exc


def _build_witness(cfg, lat):
    node = cfg.get("witness")
    if node is None:
        return None, None
    levels = _shape_levels(node, lat, "witness")
    gamma, vplus, vminus = [], [], []
    for i in range(lat.steps):
        upv, downv = levels[i + 1][1:], levels[i + 1][:-1]
        gamma.append((upv - downv) / (2.0 * lat.sqrt_dt))
        drift = 0.5 * (upv + downv) - levels[i]
        vminus.append(np.maximum(drift, 0.0))
        vplus.append(np.maximum(-drift, 0.0))
    spec = SemimartingaleSpec(
        float(levels[0][0]),
        IncreasingProcess(lat, vplus),
        IncreasingProcess(lat, vminus),
        PredictableProcess(lat, gamma),
    )
    try:
        spec.reconstruct()
    except InconsistentSemimartingale as exc:
        raise ConfigError(f"witness: {exc}") from exc
    return spec, levels


class ScenarioConfig:
    """Parsed scenario: lattice, generator, obstacle set and knobs."""

    __slots__ = (
        "lattice",
        "driver",
        "bounds",
        "barriers",
        "witness",
        "schedule",
        "squeeze_tol",
        "seed",
        "outputs",
    )

    def __init__(self, cfg):
        lat = _build_lattice(cfg)
        measures = cfg.get("measures", {})
        _check_keys(measures, {"delta", "alpha", "A"}, "measures")
        delta = _clock(measures.get("delta"), lat, "measures.delta")
        alpha = _clock(measures.get("alpha"), lat, "measures.alpha")
        A = _clock(measures.get("A"), lat, "measures.A")
        bounds = _build_bounds(cfg, lat, A)
        witness, w_levels = _build_witness(cfg, lat)
        xi = _terminal_values(cfg, lat, w_levels)

        bar_cfg = cfg.get("barriers", {})
        _check_keys(bar_cfg, {"L", "U", "l", "u"}, "barriers")

        def adapted(key):
            node = bar_cfg.get(key)
            if node is None:
                return None
            return AdaptedProcess(
                lat, _shape_levels(node, lat, f"barriers.{key}")
            )

        low = _atom_list_predictable(
            bar_cfg.get("l"), lat, "barriers.l", -np.inf
        )
        high = _atom_list_predictable(
            bar_cfg.get("u"), lat, "barriers.u", np.inf
        )
        try:
            self.barriers = BarrierSet.build(
                lat,
                xi,
                L=adapted("L"),
                U=adapted("U"),
                l=low,
                u=high,
                delta=delta,
                alpha=alpha,
                witness=witness,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"barriers: {exc}") from exc
        self.lattice = lat
        self.driver = _build_driver(cfg, lat, bounds)
        self.bounds = bounds
        self.witness = witness

        pen = cfg.get("penalization", {})
        _check_keys(pen, {"schedule", "tol"}, "penalization")
        schedule = pen.get("schedule")
        if schedule is None:
            self.schedule = DEFAULT_SCHEDULE
        else:
            if not isinstance(schedule, list) or not all(
                isinstance(n, int) and not isinstance(n, bool)
                for n in schedule
            ):
                raise ConfigError(
                    "penalization.schedule must be a list of integers"
                )
            if any(n < 0 for n in schedule) or any(
                b <= a for a, b in zip(schedule, schedule[1:])
            ):
                raise ConfigError(
                    "penalization.schedule must be nonnegative and "
                    "strictly increasing"
                )
            self.schedule = tuple(schedule)
        self.squeeze_tol = _number(pen, "tol", "penalization", default=1e-8)
        self.seed = _integer(cfg, "seed", "config", default=7)

        out = cfg.get("outputs", {})
        _check_keys(
            out, {"solution", "convergence", "envelope", "report"}, "outputs"
        )
        names = {
            "solution": "solution.csv",
            "convergence": "penalization.csv",
            "envelope": "envelope.csv",
            "report": "verify.csv",
        }
        for key in names:
            if key in out:
                if not isinstance(out[key], str) or not out[key]:
                    raise ConfigError(f"outputs.{key} must be a file name")
                names[key] = out[key]
        self.outputs = names


# ----------------------------------------------------------------- writers


def _fmt(x):
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_solution_csv(path, sol, bars):
    """One row per node; step-attributed columns blank at the horizon."""
    lat = sol.lattice
    rows = []
    for i in range(lat.steps + 1):
        t = lat.times[i]
        y = sol.Y.level(i)
        low, high = effective_barriers(bars, i)
        if i < lat.steps:
            z = sol.Z.atom(i)
            kp = sol.Kplus.atom(i)
            km = sol.Kminus.atom(i)
        for j in range(i + 1):
            if i < lat.steps:
                step_cols = [_fmt(z[j]), _fmt(kp[j]), _fmt(km[j])]
            else:
                step_cols = ["", "", ""]
            rows.append(
                [str(i), str(j), _fmt(t), _fmt(y[j])]
                + step_cols
                + [_fmt(low[j]), _fmt(high[j])]
            )
    _write_rows(
        path,
        ["level", "node", "t", "Y", "Z", "dKplus", "dKminus", "L_eff", "U_eff"],
        rows,
    )


def write_convergence_csv(path, family):
    rows = []
    table = family.gaps()
    lower0 = family.lower_solutions[0]
    upper0 = family.upper_solutions[0]
    rows.append(
        ["lower", str(family.n_schedule[0]), "", _fmt(lower0.value())]
    )
    rows.append(
        ["upper", str(family.n_schedule[0]), "", _fmt(upper0.value())]
    )
    for k, (n, lo_gap, hi_gap) in enumerate(table, start=1):
        rows.append(
            ["lower", str(n), _fmt(lo_gap), _fmt(family.lower_solutions[k].value())]
        )
        rows.append(
            ["upper", str(n), _fmt(hi_gap), _fmt(family.upper_solutions[k].value())]
        )
    _write_rows(path, ["side", "n", "sup_gap", "y0"], rows)


def write_envelope_csv(path, times, g, weights):
    profiles = [
        envelope_profile(times, g, weights, n) for n in _ENVELOPE_WEIGHTS
    ]
    star = envelope_star_profile(times, g, weights)
    header = (
        ["k", "t", "g", "mass"]
        + [f"env_{n:g}" for n in _ENVELOPE_WEIGHTS]
        + ["env_star"]
    )
    rows = []
    for k in range(times.size):
        rows.append(
            [str(k), _fmt(times[k]), _fmt(g[k]), _fmt(weights[k])]
            + [_fmt(p.values[k]) for p in profiles]
            + [_fmt(star.values[k])]
        )
    _write_rows(path, header, rows)


def write_verify_csv(path, reports):
    rows = [
        [
            str(r["criterion"]),
            r["name"],
            str(r["cases"]),
            str(r["failures"]),
            _fmt(r["max_err"]),
            _fmt(r["tol"]),
            "pass" if r["passed"] else "fail",
        ]
        for r in reports
    ]
    _write_rows(
        path,
        ["criterion", "name", "cases", "failures", "max_err", "tol", "status"],
        rows,
    )


def write_manifest(outdir, config_bytes, subcommand, artifacts, started):
    manifest = {
        "schema": _SCHEMA,
        "subcommand": subcommand,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest()
        if config_bytes is not None
        else None,
        "artifacts": sorted(artifacts),
        "versions": {
            "rbsdelab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "timings": {"total_s": round(time.perf_counter() - started, 6)},
    }
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ------------------------------------------------------------- subcommands


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_solve(scn, outdir):
    sol = solve_rbsde(scn.lattice, scn.driver, scn.barriers)
    path = outdir / scn.outputs["solution"]
    write_solution_csv(path, sol, scn.barriers)
    print(f"solve: Y0 = {sol.value()!r} -> {path}")
    return [path.name]


def run_penalize(scn, outdir, schedule_max=None):
    if scn.witness is None:
        raise ConfigError("penalize needs a witness in the scenario")
    if scn.bounds is None:
        raise ConfigError("penalize needs growth bounds in the scenario")
    schedule = scn.schedule
    if schedule_max is not None:
        schedule = tuple(n for n in schedule if n <= schedule_max)
    if len(schedule) < 2:
        raise ConfigError("penalization schedule needs at least two weights")
    family = build_family(
        scn.lattice, scn.bounds, scn.witness, scn.barriers, schedule=schedule
    )
    conv_path = outdir / scn.outputs["convergence"]
    write_convergence_csv(conv_path, family)
    sol = reduce_and_solve(
        scn.lattice,
        scn.driver,
        scn.barriers,
        schedule=schedule,
        squeeze_tol=scn.squeeze_tol,
    )
    sol_path = outdir / scn.outputs["solution"]
    write_solution_csv(sol_path, sol, scn.barriers)
    print(
        f"penalize: {len(schedule)} weights, reduced Y0 = {sol.value()!r} "
        f"-> {conv_path}, {sol_path}"
    )
    return [conv_path.name, sol_path.name]


def run_snell(scn, outdir):
    inst = SnellInstance(
        scn.barriers.L,
        scn.barriers.l,
        scn.barriers.delta,
        scn.barriers.xi,
        witness=scn.witness,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = snell_envelope(inst)
    path = outdir / scn.outputs["solution"]
    write_solution_csv(path, sol, inst.barriers)
    print(f"snell: Y0 = {sol.value()!r} -> {path}")
    return [path.name]


def run_envelope(scn, outdir):
    lat = scn.lattice
    try:
        weights = scn.barriers.delta.weights_by_time()
    except ValueError as exc:
        raise ConfigError(f"envelope tables need a time-indexed clock: {exc}")
    g = np.full(lat.steps + 1, -np.inf)
    for i in range(lat.steps):
        slot = scn.barriers.l.atom(i)
        if slot.size and not np.all(slot == slot[0]):
            raise ConfigError(
                "envelope tables need a time-indexed lower predictable "
                f"obstacle (values vary across nodes at time index {i + 1})"
            )
        g[i + 1] = slot[0]
    path = outdir / scn.outputs["envelope"]
    write_envelope_csv(path, lat.times, g, weights)
    print(f"envelope: {lat.steps + 1} grid times -> {path}")
    return [path.name]


def run_verify(args, report_name, outdir):
    reports, log = run_all(
        seed=args.seed if args.seed is not None else 7,
        cases=args.cases,
        max_depth=args.depth,
        tol=args.tol,
        schedule_max=args.schedule_max,
    )
    path = outdir / report_name
    write_verify_csv(path, reports)
    all_pass = True
    for r in reports:
        status = "PASS" if r["passed"] else "FAIL"
        all_pass = all_pass and r["passed"]
        print(
            f"[{status}] criterion {r['criterion']}: {r['name']} "
            f"({r['cases']} cases, {r['failures']} failures, "
            f"max err {r['max_err']:.3e}, tol {r['tol']:g})"
        )
    print(f"verify: {log.solves} solves audited -> {path}")
    if not all_pass:
        raise _VerificationFailed()
    return [path.name]


class _VerificationFailed(Exception):
    pass


# ------------------------------------------------------------------ driver


def _parser():
    parser = argparse.ArgumentParser(
        prog="rbsdelab",
        description="Obstacle-constrained backward solves on a binomial "
        "lattice: scenarios in, CSV artifacts out.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, needs_config in (
        ("solve", True),
        ("penalize", True),
        ("snell", True),
        ("envelope", True),
        ("verify", False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="scenario JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--depth", type=int, default=None)
        p.add_argument("--cases", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--schedule-max", type=int, default=None)
    return parser


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    started = time.perf_counter()
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; that is a config error here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        outdir = _outdir(args)
        config_bytes = None
        if args.subcommand == "verify":
            report_name = "verify.csv"
            if args.config is not None:
                cfg, config_bytes = load_config(args.config)
                if args.seed is None:
                    args.seed = _integer(cfg, "seed", "config", default=7)
                out_cfg = cfg.get("outputs", {})
                _check_keys(
                    out_cfg,
                    {"solution", "convergence", "envelope", "report"},
                    "outputs",
                )
                if "report" in out_cfg:
                    report_name = out_cfg["report"]
            artifacts = run_verify(args, report_name, outdir)
        else:
            cfg, config_bytes = load_config(args.config)
            scn = ScenarioConfig(cfg)
            if args.subcommand == "solve":
                artifacts = run_solve(scn, outdir)
            elif args.subcommand == "penalize":
                artifacts = run_penalize(
                    scn, outdir, schedule_max=args.schedule_max
                )
            elif args.subcommand == "snell":
                artifacts = run_snell(scn, outdir)
            else:
                artifacts = run_envelope(scn, outdir)
        manifest = write_manifest(
            outdir, config_bytes, args.subcommand, artifacts, started
        )
        print(f"manifest -> {manifest}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleBarriers as exc:
        print(f"infeasible obstacles: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _VerificationFailed:
        print("verification failed", file=sys.stderr)
        return EXIT_NUMERICAL
    except (
        ImplicitStepDivergence,
        NonFiniteDriver,
        ScheduleExhausted,
        SandwichViolation,
        HypothesisAViolated,
        InconsistentSemimartingale,
        RuntimeError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
