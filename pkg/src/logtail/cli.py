"""Batch experiment runner: one JSON config in, CSV/JSON artifacts out.

Usage: logtail <command> --config <file-or-inline-json>
                        [--out DIR] [--format csv|json] [--seed N]

Commands: operators, tauberian, stpetersburg, semistable, gw, smoothing,
suite.  The config is a single schema-validated JSON document (unknown keys
rejected); flags only override output path, format, and seed.  A "model"
key may hold either an inline object or a path to a JSON file; its fields
are merged into the document before validation.

Exit codes: 0 every requested check passed; 2 at least one inconclusive;
1 a check failed or a numerical error occurred; 64 config rejected.
Identical config + seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from referencing import Registry, Resource
from scipy import special

from . import csvio
from .core import (
    GeometricGrid,
    PeriodicFn,
    SlowlyVaryingFn,
    check_class_membership,
)
from .models import (
    GaltonWatson,
    SemistableLaw,
    SmoothingModel,
    StPetersburg,
    admissible_amplitude,
    mc_tail_rows,
    population_run,
    transform_rows,
)
from .operators import apply_A, apply_B, apply_B_inv, chain_q_from_p
from .tauberian import (
    ClauseResult,
    EquivalenceReport,
    bd_equivalence_suite,
    estimate_tail_limit,
    estimate_transform_limit,
    verify_karamata_suite,
    verify_monotone_density,
    verify_tauberian,
)

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "run", "main"]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_CONFIG = 64

COMMANDS = ("operators", "tauberian", "stpetersburg", "semistable", "gw",
            "smoothing", "suite")

_COMMON_DEFAULTS = {"seed": 0, "out_dir": ".", "formats": ["csv", "json"]}

DEFAULTS = {
    "operators": {"rho": 0.5, "r": 2.0, "n_z": 64},
    "tauberian": {
        "suite": "tauberian", "rho": 0.5, "mode": "direct", "tol": 5e-3,
        "input": {"kind": "power"},
        "grid": {"r": 2.0, "n_max": 40, "n_z": 16},
        "m": 0, "beta": 0.5,
    },
    "stpetersburg": {"alpha": 0.5, "n_max": 30, "n_z": 64},
    "semistable": {
        "alpha": 0.5, "r": 4.0, "amplitude": 0.05, "offset": 1.0,
        "samples": 200_000, "eps": 1e-4, "n_values": [3, 4, 5, 6], "n_z": 8,
        "write_samples": False,
    },
    "gw": {
        "pgf": [0.25, 0.0, 0.75], "samples": 1_000_000, "generations": 25,
        "n_values": [4, 5, 6, 7, 8], "z_values": [1.0],
        "s_grid_n": 33, "drift_tol": 0.05,
    },
    "smoothing": {
        "alpha": 0.25, "r": 16.0,
        "atoms": [[0.85, [1, 1]], [0.15, [1, 2, 2]]],
        "h0": {"mean": 1.0, "amplitude": 0.0057},
        "size": 100_000, "iters": 50, "replicates": 8,
        "n_values": [7], "n_z": 8,
        "t_values": [0.0625, 0.25, 1.0, 4.0, 16.0, 64.0, 256.0],
        "write_samples": False,
    },
    "suite": {"n_z": 16},
}


class ConfigError(Exception):
    """Configuration rejected: parse error, schema violation, or bad value."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed, defaulted, schema-validated configuration document."""

    command: str
    doc: dict = field(repr=False)

    def __getitem__(self, key):
        return self.doc[key]

    def __contains__(self, key):
        return key in self.doc

    def get(self, key, default=None):
        return self.doc.get(key, default)

    @property
    def seed(self) -> int:
        return self.doc["seed"]

    @property
    def out_dir(self) -> str:
        return self.doc["out_dir"]

    @property
    def formats(self) -> tuple:
        return tuple(self.doc["formats"])

    def canonical(self) -> dict:
        return json.loads(json.dumps(self.doc, sort_keys=True))

    def dumps(self) -> str:
        return json.dumps(self.canonical(), indent=2, sort_keys=True)

    def experiment_doc(self) -> dict:
        # out_dir and formats are plumbing: artifacts must be byte-identical
        # wherever they are written, so they stay out of the hash
        return {k: v for k, v in self.canonical().items()
                if k not in ("out_dir", "formats")}

    @property
    def config_hash(self) -> str:
        return csvio.config_hash(self.experiment_doc())


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------


def _schema_store():
    base = resources.files("logtail") / "schemas"
    store = {}
    for name in COMMANDS + ("common",):
        doc = json.loads((base / f"{name}.json").read_text())
        store[doc["$id"]] = doc
    return store


def _validate_schema(doc: dict, command: str) -> None:
    store = _schema_store()
    registry = Registry().with_resources(
        (uri, Resource.from_contents(s)) for uri, s in store.items())
    validator = jsonschema.Draft202012Validator(
        store[f"https://logtail.invalid/schemas/{command}.json"], registry=registry)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
        raise ConfigError(f"{path}: {e.message}")


def _merge_defaults(command: str, doc: dict) -> dict:
    merged = dict(_COMMON_DEFAULTS)
    defaults = dict(DEFAULTS[command])
    if command == "smoothing" and "branching" in doc:
        # deterministic stable shortcut: r and atoms come from branching
        defaults.pop("atoms")
        defaults.pop("r")
        defaults["h0"] = {"mean": 1.0, "amplitude": 0.0}
        defaults["alpha"] = 0.5
    merged.update(defaults)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            sub = dict(merged[key])
            sub.update(value)
            merged[key] = sub
        else:
            merged[key] = value
    return merged


def load_config(source: str, command: str | None = None) -> ExperimentConfig:
    """Parse a config from a file path or inline JSON text.

    The optional command argument (from the CLI subcommand) must agree with
    the document's own "command" key when both are present.
    """
    text = source.strip()
    if not text.startswith("{"):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"config file not found: {source}")
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    model = doc.pop("model", None)
    if model is not None:
        if isinstance(model, str):
            path = Path(model)
            if not path.is_file():
                raise ConfigError(f"$.model: referenced file not found: {model}")
            try:
                model = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"$.model: file is not valid JSON: {exc}") from exc
        if not isinstance(model, dict):
            raise ConfigError("$.model: must be an object or a file path")
        for key, value in model.items():
            if key in doc and doc[key] != value:
                raise ConfigError(f"$.model.{key}: conflicts with top-level {key}")
            doc[key] = value

    given = doc.get("command")
    if command is not None and given is not None and given != command:
        raise ConfigError(
            f"$.command: config says {given!r} but the subcommand is {command!r}")
    if command is None and given is None:
        raise ConfigError("$.command: missing (no subcommand to infer it from)")
    doc["command"] = command or given

    return canonical_config(doc)


def canonical_config(doc: dict) -> ExperimentConfig:
    """Fill defaults, validate against the command schema, canonicalize."""
    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"$.command: must be one of {', '.join(COMMANDS)}")
    merged = _merge_defaults(command, doc)
    _validate_schema(merged, command)
    _validate_semantics(merged)
    return ExperimentConfig(command=command, doc=json.loads(
        json.dumps(merged, sort_keys=True)))


def _validate_semantics(doc: dict) -> None:
    cmd = doc["command"]
    if cmd == "operators" and doc["rho"] == 0:
        raise ConfigError("$.rho: 0 is excluded (the rho = 0 class is "
                          "constants; B_0 is undefined)")
    if cmd == "gw":
        total = sum(doc["pgf"])
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"$.pgf: probabilities sum to {total!r}, not 1")
    if cmd == "smoothing":
        if "branching" in doc and "atoms" in doc:
            raise ConfigError("$.branching: mutually exclusive with $.atoms")
        if "atoms" in doc:
            total = sum(pr for pr, _ in doc["atoms"])
            if abs(total - 1.0) > 1e-12:
                raise ConfigError(f"$.atoms: probabilities sum to {total!r}, not 1")
    if cmd == "semistable":
        bound = doc["offset"] * admissible_amplitude(doc["alpha"], doc["r"])
        if doc["amplitude"] > bound:
            raise ConfigError(
                f"$.amplitude: {doc['amplitude']} exceeds the admissible "
                f"bound {bound:.6g} for alpha={doc['alpha']}, r={doc['r']}")


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def _zgrid(r: float, n_z: int) -> np.ndarray:
    return np.exp(np.linspace(0.0, math.log(r), n_z, endpoint=False))


def _clause_bound(name, value, tol, note=""):
    status = "pass" if value <= tol else "fail"
    return ClauseResult(name, status, float(value), float(tol), note)


def _clause_rows_3se(name, rows, dev_over_se, note=""):
    worst = max(dev_over_se) if dev_over_se else math.nan
    status = "pass" if worst <= 3.0 else "fail"
    return ClauseResult(name, status, float(worst), 3.0,
                        note or f"max |dev|/se over {len(rows)} rows")


def _rng(cfg: ExperimentConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed))


# ---------------------------------------------------------------------------
# command handlers: each returns (report, tables, sample_sets)
# tables: list of (name, header, rows); sample_sets: list of (name, array, meta)
# ---------------------------------------------------------------------------


def _run_operators(cfg, rng):
    rho = cfg["rho"]
    if "p" in cfg:
        p = PeriodicFn.from_json(cfg["p"])
    else:
        p = PeriodicFn.constant(1.0, cfg["r"])
    r = p.r
    zs = _zgrid(r, cfg["n_z"])

    b = apply_B(rho, p)
    binv_b = apply_B_inv(rho, b)
    a = apply_A(rho, p) if rho > 0 else None

    rows = []
    for z in zs:
        z = float(z)
        row = [z, p.value_in_period(z), b.value_in_period(z),
               binv_b.value_in_period(z),
               a.value(z) if a is not None else math.nan, ""]
        rows.append(row)
    header = ["z", "p", "B_p", "Binv_B_p", "A_p", "flags"]

    clauses = []
    scale = max(abs(v) for v in (row[2] for row in rows))
    for name, fn in (("B", b.value), ("Binv-B", binv_b.value)) + (
            (("A", a.value),) if a is not None else ()):
        dev = max(abs(fn(float(z) * r) - fn(float(z))) for z in zs)
        clauses.append(_clause_bound(f"{name}-periodicity", dev / max(scale, 1e-300),
                                     1e-8, "relative over one period"))
    const = None
    lo, hi = p.min_max()
    if hi - lo <= 1e-12 * max(abs(hi), 1.0):
        const = 0.5 * (lo + hi)
    if const is not None:
        want_b = const / abs(rho)
        dev_b = max(abs(row[2] - want_b) for row in rows)
        clauses.append(_clause_bound("B-constant-identity", dev_b, 1e-12,
                                     f"B_rho c = c/|rho| at c={const:g}"))
        if a is not None:
            want_a = const * special.gamma(rho + 1.0)
            dev_a = max(abs(row[4] - want_a) for row in rows)
            clauses.append(_clause_bound("A-constant-identity", dev_a, 1e-8,
                                         f"A_rho c = c Gamma(rho+1) = {want_a:.10g}"))
    if p.is_continuous():
        dev = max(abs(row[3] - row[1]) for row in rows)
        clauses.append(_clause_bound("roundtrip-Binv-B", dev, 1e-8,
                                     "B_inv(B p) = p on smooth p"))
    else:
        clauses.append(ClauseResult("roundtrip-Binv-B", "skipped",
                                    note="p has jumps; roundtrip needs q'"))

    params = {"rho": rho, "r": r}
    if a is not None:
        params["A_at_1"] = a.value(1.0)
    report = EquivalenceReport("operators", rho, tuple(clauses), params)
    return report, [("table", header, rows)], []


# -- tauberian ---------------------------------------------------------------


def _stp_integrated_tail(model: StPetersburg, x: float) -> float:
    """U(x) = integral_0^x survival(t) dt, exactly (staircase integral)."""
    if x <= 0:
        return 0.0
    r = model.r
    total = 0.0
    k = 0
    lo = 0.0
    while True:
        hi = r ** (k + 1)  # tail is constant on [r^k, r^(k+1)) for k >= 0; 1 below r
        level = model.tail(max(lo, 1e-300) if lo else 0.5 * min(x, r))
        if x <= hi:
            total += (x - lo) * level
            return total
        total += (hi - lo) * level
        lo = hi
        k += 1


def _tauberian_target(cfg):
    """Build (suite_args, extras) for the configured suite and input kind."""
    suite = cfg["suite"]
    inp = cfg["input"]
    kind = inp["kind"]
    scale = inp.get("scale", 1.0)
    rho = cfg["rho"]
    tol = cfg["tol"]
    gcfg = cfg["grid"]

    def grid(r):
        return GeometricGrid.default(r, n_z=gcfg["n_z"], n_range=(0, gcfg["n_max"]))

    if suite == "tauberian":
        if kind == "power":
            if rho < 0:
                raise ConfigError("$.rho: the tauberian suite needs rho >= 0")
            U = lambda x: scale * x**rho
            Uhat = lambda s: scale * special.gamma(rho + 1.0) * s**-rho
            return ("tauberian", ((U, Uhat), SlowlyVaryingFn(), rho,
                                  grid(gcfg["r"]), tol)), {}
        if kind == "power-periodic":
            if rho <= 0:
                raise ConfigError("$.rho: power-periodic input needs rho > 0")
            r_in = inp.get("r", gcfg["r"])
            amp = inp.get("amplitude", 0.05)
            p0 = PeriodicFn.coslog(scale, scale * amp, r_in)
            U = lambda x: x**rho * p0.value(x)
            q_exact = apply_A(rho, p0)
            Uhat = lambda s: s**-rho * q_exact.value(s)
            return ("tauberian", ((U, Uhat), SlowlyVaryingFn(), rho,
                                  grid(r_in), tol)), {}
        if kind == "log":
            U = lambda x: math.log(x) if x > 1 else 0.0
            Uhat = lambda s: float(special.exp1(s))
            ell = SlowlyVaryingFn(kind="log-power")
            return ("tauberian", ((U, Uhat), ell, 0.0,
                                  grid(gcfg["r"]), tol)), {}
        if kind == "stpetersburg":
            alpha = inp.get("alpha", 0.5)
            if alpha >= 1:
                raise ConfigError("$.input.alpha: need alpha < 1 here")
            model = StPetersburg(alpha)
            U = lambda x: _stp_integrated_tail(model, x)
            Uhat = lambda s: model.one_minus_hat_F(s) / s
            return ("tauberian", ((U, Uhat), SlowlyVaryingFn(), 1.0 - alpha,
                                  grid(model.r), tol)), {"alpha": alpha}
    if suite == "karamata":
        mode = cfg["mode"]
        if kind == "power" and mode in ("direct", "at-zero"):
            if rho <= 0:
                raise ConfigError("$.rho: karamata direct/at-zero needs rho > 0")
            u = lambda y: scale * rho * y ** (rho - 1.0)
            return ("karamata", (u, SlowlyVaryingFn(), rho, mode,
                                 grid(gcfg["r"]), tol)), {}
        if kind == "power-periodic" and mode in ("direct", "rho-negative"):
            if mode == "direct" and rho <= 0:
                raise ConfigError("$.rho: karamata direct needs rho > 0")
            if mode == "rho-negative" and rho >= 0:
                raise ConfigError("$.rho: karamata rho-negative needs rho < 0")
            r_in = inp.get("r", gcfg["r"])
            amp = inp.get("amplitude", 0.05)
            p0 = PeriodicFn.coslog(1.0, amp, r_in)
            u = lambda y: scale * y ** (rho - 1.0) * p0.value(y)
            return ("karamata", (u, SlowlyVaryingFn(), rho, mode,
                                 grid(r_in), tol)), {}
        if kind == "log" and mode == "rho0":
            # U ~ scale log x is slowly varying and dominates ell = 1;
            # u is flattened below 1 to stay integrable at the origin
            u = lambda y: scale / max(y, 1.0)
            return ("karamata", (u, SlowlyVaryingFn(), 0.0, "rho0",
                                 grid(gcfg["r"]), tol)), {}
        raise ConfigError(
            f"$.input.kind: {kind!r} with mode {cfg['mode']!r} is not a "
            "supported karamata combination")
    if suite == "monotone-density":
        if kind == "power":
            if rho <= 0:
                raise ConfigError("$.rho: monotone-density needs rho > 0")
            U = lambda x: scale * x**rho
            u = lambda y: scale * rho * y ** (rho - 1.0)
            return ("monotone-density", (U, u, SlowlyVaryingFn(), rho,
                                         grid(gcfg["r"]), tol)), {}
        if kind == "power-periodic":
            if rho <= 0:
                raise ConfigError("$.rho: monotone-density needs rho > 0")
            r_in = inp.get("r", gcfg["r"])
            amp = inp.get("amplitude", 0.002)
            omega = 2.0 * math.pi / math.log(r_in)
            # u' keeps one sign iff amp * M <= rho |rho - 1|, where M is the
            # oscillation amplitude of (rho-1) p-part + p'-part
            M = math.hypot(rho * rho - rho - omega * omega,
                           omega * (2.0 * rho - 1.0))
            bound = rho * abs(rho - 1.0) / M
            if amp > 0.95 * bound:
                raise ConfigError(
                    f"$.input.amplitude: {amp} leaves u not ultimately "
                    f"monotone (bound {bound:.4g} at rho={rho}, r={r_in})")
            p = PeriodicFn.coslog(scale, scale * amp, r_in)

            def U(x):
                return x**rho * p.value(x)

            def u(y):
                c = math.cos(omega * math.log(y))
                s = math.sin(omega * math.log(y))
                return y ** (rho - 1.0) * scale * (
                    rho + amp * (rho * c - omega * s))

            return ("monotone-density", (U, u, SlowlyVaryingFn(), rho,
                                         grid(r_in), tol)), {}
        raise ConfigError(f"$.input.kind: {kind!r} unsupported for "
                          "monotone-density (use power or power-periodic)")
    if suite == "bd":
        if kind != "stpetersburg":
            raise ConfigError("$.input.kind: the bd suite runs on the "
                              "stpetersburg input")
        if cfg["m"] != 0:
            # m >= 1 needs a finite mean, which this family never has
            raise ConfigError("$.m: must be 0 with the stpetersburg input")
        alpha = inp.get("alpha", cfg["beta"])
        if not 0 < alpha < 1:
            raise ConfigError("$.input.alpha: need alpha in (0, 1); alpha = 1 "
                              "carries a logarithmic factor this runner does "
                              "not model")
        model = StPetersburg(alpha)
        return ("bd", (model.measure, 0, alpha,
                       grid(model.r), tol)), {"alpha": alpha}
    raise ConfigError(f"$.input.kind: {kind!r} unsupported for suite "
                      f"{suite!r}")


def _run_tauberian(cfg, rng):
    suite, extras = _tauberian_target(cfg)
    name, args = suite
    if name == "tauberian":
        report = verify_tauberian(*args)
    elif name == "karamata":
        report = verify_karamata_suite(*args)
    elif name == "monotone-density":
        report = verify_monotone_density(*args)
    else:
        report = bd_equivalence_suite(*args)

    tables = []
    if name == "tauberian":
        (U, Uhat), ell, rho, grid, _tol = args
        p_est = estimate_tail_limit(U, ell, rho, grid)
        q_est = estimate_transform_limit(Uhat, ell, rho, grid)
        for label, est in (("tail", p_est), ("transform", q_est)):
            header = ["z"] + [str(int(n)) for n in est.n_values]
            rows = [[float(z)] + [float(v) for v in est.table[i]]
                    for i, z in enumerate(est.z_points)]
            tables.append((f"{label}_ratio_grid", header, rows))
            tables.append((f"{label}_limits",) + est.to_rows())
    params = dict(report.params)
    params.update(extras)
    params["input"] = cfg["input"]["kind"]
    report = EquivalenceReport(report.suite, report.rho, report.clauses, params)
    return report, tables, []


# -- models ------------------------------------------------------------------


def _run_stpetersburg(cfg, rng):
    model = StPetersburg(cfg["alpha"])
    alpha, r = model.alpha, model.r
    zs = _zgrid(r, cfg["n_z"])
    n_max = cfg["n_max"]
    p = model.period_p()

    p_rows = [[float(z), p.value_in_period(float(z))] for z in zs]
    tables = [("p_table", ["z", "p"], p_rows)]
    clauses = []

    # closed staircase vs direct atom summation
    dev_series = 0.0
    for z in zs[:: max(1, len(zs) // 8)]:
        for n in (0, 3, 7):
            x = r**n * float(z)
            series = 0.0
            k = 1
            while k <= 80:
                if r**k > x:
                    series += 2.0**-k
                k += 1
            dev_series = max(dev_series, abs(model.tail(x) - series))
    clauses.append(_clause_bound("closed-vs-atom-series", dev_series, 1e-14))

    # n-independence of the scaled tail
    dev_n = 0.0
    for z in zs:
        vals = [model.tail(r**n * float(z)) * (r**n * float(z))**alpha
                for n in range(0, n_max + 1)]
        dev_n = max(dev_n, max(vals) - min(vals))
    clauses.append(_clause_bound("tail-ratio-n-independent", dev_n, 1e-12))

    if alpha < 1.0:
        q_chain = chain_q_from_p(alpha, p)
        q_rows = []
        dev_series = 0.0
        dev_chain = 0.0
        for z in zs:
            s = float(z) * r ** (-n_max)
            est = model.one_minus_hat_F(s) / s**alpha
            ser = model.q0(s)
            chn = q_chain.value(s)
            dev_series = max(dev_series, abs(est - ser))
            dev_chain = max(dev_chain, abs(est - chn))
            q_rows.append([float(z), s, ser, est, chn])
        tables.append(("q0_table",
                       ["z", "s", "q0_series", "transform_estimate", "chain"],
                       q_rows))
        clauses.append(_clause_bound("q0-estimate-vs-series", dev_series, 1e-3,
                                     f"at n={n_max}"))
        clauses.append(_clause_bound("q0-estimate-vs-chain", dev_chain, 1e-3))
    else:
        val = model.normalized_remainder(2.0**-30)
        clauses.append(_clause_bound("alpha1-log-remainder", abs(val - 1.0),
                                     0.02, f"value {val:.6f} at s=2^-30"))

    report = EquivalenceReport("stpetersburg", -alpha, tuple(clauses),
                               {"alpha": alpha, "r": r, "n_max": n_max})
    return report, tables, []


def _run_semistable(cfg, rng, mc=True):
    alpha, r = cfg["alpha"], cfg["r"]
    law = SemistableLaw.coslog(alpha, r, cfg["amplitude"], cfg["offset"])
    clauses = []
    bound = cfg["offset"] * admissible_amplitude(alpha, r)
    clauses.append(_clause_bound("amplitude-admissible", cfg["amplitude"],
                                 bound, "keeps the Levy tail monotone"))
    tables = []
    samples_out = []

    if cfg["amplitude"] == 0.0:
        want = cfg["offset"] * special.gamma(1.0 - alpha)
        got = law.normalized_remainder(1e-8)
        clauses.append(_clause_bound("stable-remainder", abs(got / want - 1.0),
                                     1e-4, "(1-phi)/(c Gamma(1-alpha) s^alpha) at s=1e-8"))
    if mc:
        w = law.sample(cfg["samples"], rng, eps=cfg["eps"])
        zs = _zgrid(r, cfg["n_z"])
        header, rows = law.mc_tail_rows(w, cfg["n_values"], zs)
        tables.append(("mc_table", header, rows))
        devs = [abs(row[2] - row[3]) / row[4] for row in rows]
        clauses.append(_clause_rows_3se("mc-tail-3se", rows, devs))
        if cfg["write_samples"]:
            samples_out.append(("samples", w))

    report = EquivalenceReport("semistable", -alpha, tuple(clauses),
                               {"alpha": alpha, "r": r,
                                "amplitude": cfg["amplitude"]})
    return report, tables, samples_out


def _run_gw(cfg, rng, mc=True):
    try:
        gw = GaltonWatson(tuple(cfg["pgf"]))
    except ValueError as exc:
        raise ConfigError(f"$.pgf: {exc}") from exc
    mu, alpha = gw.mean, gw.alpha
    clauses = []
    tables = []

    s_grid = np.linspace(0.0, 0.9, cfg["s_grid_n"])
    res = max(abs(gw.schroeder_residual(float(s))) for s in s_grid)
    clauses.append(_clause_bound("schroeder-residual", res, 1e-9,
                                 "on s in [0, 0.9]"))

    ks = np.exp(np.linspace(25.0 * math.log(mu), 15.0 * math.log(mu), 64))
    k_vals = [gw.K(float(s)) for s in ks]
    k_dev = max(abs(gw.K(mu * float(s)) / gw.K(float(s)) - 1.0)
                for s in ks[:: 4])
    clauses.append(_clause_bound("K-log-periodic", k_dev, 1e-6,
                                 "K(mu s)/K(s) on [mu^25, mu^15]"))
    tables.append(("K_table", ["s", "K"],
                   [[float(s), float(v)] for s, v in zip(ks, k_vals)]))

    harris = gw.harris_ratio(mu**25)
    clauses.append(_clause_bound("harris-ratio", abs(harris - 1.0), 0.01,
                                 f"value {harris:.8f} at s=mu^25"))

    if mc:
        counts = gw.simulate_counts(cfg["samples"], cfg["generations"], rng)
        header, rows = gw.mc_small_value_rows(
            counts, cfg["generations"], cfg["n_values"], cfg["z_values"])
        tables.append(("mc_table", header, rows))
        drift = 0.0
        by_z = {}
        for n, z, ratio, se in rows:
            by_z.setdefault(z, []).append((n, ratio))
        for seq in by_z.values():
            seq.sort()
            for (_, a), (_, b) in zip(seq, seq[1:]):
                if a > 0:
                    drift = max(drift, abs(b / a - 1.0))
        clauses.append(_clause_bound("mc-ratio-drift", drift, cfg["drift_tol"],
                                     "between consecutive n"))

    report = EquivalenceReport("gw", -alpha, tuple(clauses),
                               {"mean": mu, "alpha": alpha,
                                "gamma": gw.gamma, "q": gw.extinction_prob})
    return report, tables, []


def _run_smoothing(cfg, rng, population=True):
    if "branching" in cfg:
        model = SmoothingModel.deterministic_stable(cfg["alpha"],
                                                    cfg["branching"])
    else:
        atoms = tuple((float(pr), tuple(int(e) for e in exps))
                      for pr, exps in cfg["atoms"])
        try:
            model = SmoothingModel(alpha=cfg["alpha"], r=cfg["r"], atoms=atoms)
        except ValueError as exc:
            raise ConfigError(f"$.atoms: {exc}") from exc
    h0 = PeriodicFn.coslog(cfg["h0"]["mean"], cfg["h0"]["amplitude"], model.r)
    deterministic = (len(model.atoms) == 1 and cfg["h0"]["amplitude"] == 0.0)

    clauses = []
    assume = model.check_assumptions()
    clauses.append(ClauseResult(
        "assumptions", "pass" if assume.passed else "fail",
        note="; ".join(name for name, ok, _ in assume.checks if not ok)
        or "all weight-law conditions hold"))

    sol = model.solve(h0=h0)
    clauses.append(_clause_bound("fixed-point-residual", sol.residual(), 1e-8))
    clauses.append(_clause_bound("h-log-periodic", sol.h_periodicity(), 1e-6,
                                 "relative period defect"))
    if deterministic:
        h = sol.h_values()
        mask = sol.j_values >= 0
        dev = float(np.ptp(h[mask]) / max(abs(np.mean(h[mask])), 1e-300))
        clauses.append(_clause_bound("h-constant-stable", dev, 1e-6,
                                     "deterministic stable case"))

    p = sol.chain_p()
    member = check_class_membership(p, "P_r_rho", rho=-model.alpha, tol=1e-7)
    clauses.append(ClauseResult(
        "tail-class-membership", "pass" if member.passed else "fail",
        note="x^-alpha p(x) monotone conditions" if member.passed
        else ", ".join(c.name for c in member.failing())))

    mask = sol.j_values >= 0
    tables = [
        ("h_table", ["t", "h"],
         [[float(t), float(v)] for t, v
          in zip(sol.t_values[mask], sol.h_values()[mask])][: 4 * sol.kappa]),
        ("p_table", ["z", "p"],
         [[float(z), p.value_in_period(float(z))]
          for z in _zgrid(model.r, 256)]),
    ]
    samples_out = []

    if population:
        zs = _zgrid(model.r, cfg["n_z"])
        x_values = sorted({float(model.r**n * z)
                           for n in cfg["n_values"] for z in zs})
        runs = []
        for child in np.random.SeedSequence(cfg["seed"]).spawn(cfg["replicates"]):
            child_rng = np.random.default_rng(child)
            runs.append(population_run(
                model, p, cfg["size"], cfg["iters"], child_rng,
                x_values=x_values, t_values=tuple(cfg["t_values"])))
        header, rows = mc_tail_rows(model, p, runs, cfg["n_values"], zs)
        tables.append(("mc_tail_table", header, rows))
        devs = [abs(row[2] - row[3]) / row[4] for row in rows]
        clauses.append(_clause_rows_3se("population-tail-3se", rows, devs,
                                        f"read at iteration {rows[0][5]}"))
        header2, rows2 = transform_rows(sol, runs)
        tables.append(("mc_transform_table", header2, rows2))
        devs2 = [abs(row[1] - row[2]) / row[3] for row in rows2]
        clauses.append(_clause_rows_3se("population-transform-3se", rows2, devs2,
                                        f"read at iteration {rows2[0][4]}"))
        if cfg["write_samples"]:
            samples_out.append(("pool", runs[0].final_pop))

    report = EquivalenceReport("smoothing", -model.alpha, tuple(clauses),
                               {"alpha": model.alpha, "r": model.r,
                                "atoms": repr(model.atoms)})
    return report, tables, samples_out


def _run_suite(cfg, rng):
    """Fast cross-module integrity battery (analytic legs only, no MC)."""
    n_z = cfg["n_z"]
    parts = []

    sub = canonical_config({"command": "operators", "n_z": n_z})
    parts.append(("operators", _run_operators(sub, rng)[0]))

    sub = canonical_config({"command": "stpetersburg", "n_z": n_z})
    parts.append(("stpetersburg", _run_stpetersburg(sub, rng)[0]))

    sub = canonical_config({"command": "semistable", "amplitude": 0.0})
    parts.append(("semistable", _run_semistable(sub, rng, mc=False)[0]))

    sub = canonical_config({"command": "gw"})
    parts.append(("gw", _run_gw(sub, rng, mc=False)[0]))

    sub = canonical_config({"command": "smoothing", "branching": 2})
    parts.append(("smoothing", _run_smoothing(sub, rng, population=False)[0]))

    clauses = []
    for prefix, rep in parts:
        for c in rep.clauses:
            clauses.append(ClauseResult(f"{prefix}:{c.name}", c.status,
                                        c.discrepancy, c.tol, c.note))
    report = EquivalenceReport("suite", math.nan, tuple(clauses),
                               {"commands": ",".join(p for p, _ in parts)})
    return report, [], []


_HANDLERS = {
    "operators": _run_operators,
    "tauberian": _run_tauberian,
    "stpetersburg": _run_stpetersburg,
    "semistable": _run_semistable,
    "gw": _run_gw,
    "smoothing": _run_smoothing,
    "suite": _run_suite,
}


# ---------------------------------------------------------------------------
# artifact writing and entry points
# ---------------------------------------------------------------------------


def _write_artifacts(cfg: ExperimentConfig, report, tables, sample_sets):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config": cfg.config_hash, "seed": cfg.seed}
    written = []
    if "csv" in cfg.formats:
        for name, header, rows in tables:
            path = out / f"{cfg.command}_{name}.csv"
            csvio.write_csv(path, header, rows, meta)
            written.append(path)
        for name, values in sample_sets:
            path = out / f"{cfg.command}_{name}.csv"
            model_keys = {k: v for k, v in cfg.canonical().items()
                          if k not in ("seed", "out_dir", "formats", "command",
                                       "write_samples")}
            csvio.write_csv(path, ["value"], [[float(v)] for v in values],
                            {"seed": cfg.seed, "count": len(values),
                             "model": csvio.config_hash(model_keys)})
            written.append(path)
    if "json" in cfg.formats:
        path = out / f"{cfg.command}_report.json"
        csvio.write_json(path, {
            "config": cfg.experiment_doc(),
            "config_hash": cfg.config_hash,
            "report": report.to_json(),
        })
        written.append(path)
    return written


def _write_diagnostic(cfg: ExperimentConfig, exc: Exception):
    try:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csvio.write_json(out / f"{cfg.command}_diagnostic.json", {
            "error": type(exc).__name__,
            "message": str(exc),
            "config_hash": cfg.config_hash,
        })
    except OSError:
        pass


def run(cfg: ExperimentConfig, verbose: bool = False) -> int:
    """Execute one experiment; write artifacts; map the verdict to an exit code."""
    handler = _HANDLERS[cfg.command]
    try:
        report, tables, sample_sets = handler(cfg, _rng(cfg))
    except ConfigError:
        raise
    except Exception as exc:  # numerical failure: diagnose, don't trace-dump
        _write_diagnostic(cfg, exc)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(report.render_text())
    written = _write_artifacts(cfg, report, tables, sample_sets)
    if verbose:
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL,
            "inconclusive": EXIT_INCONCLUSIVE}[report.verdict]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logtail",
        description="Numerical verification of log-periodic Tauberian theory.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        defaults = dict(_COMMON_DEFAULTS)
        defaults.update(DEFAULTS[cmd])
        sp = sub.add_parser(
            cmd,
            help=f"run the {cmd} experiment",
            description=f"Run the {cmd} experiment from a JSON config.",
            epilog="config defaults:\n"
                   + json.dumps(defaults, indent=2, sort_keys=True),
            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", metavar="FILE|JSON",
                        help="config file path, or an inline JSON object")
        sp.add_argument("--out", metavar="DIR",
                        help="output directory (overrides config out_dir)")
        sp.add_argument("--format", action="append", choices=["csv", "json"],
                        help="artifact format; repeatable (overrides config)")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        sp.add_argument("-v", "--verbose", action="store_true",
                        help="list written artifacts on stderr")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config, args.command)
        else:
            cfg = canonical_config({"command": args.command})
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.format:
            overrides["formats"] = sorted(set(args.format))
        if overrides:
            doc = cfg.canonical()
            doc.update(overrides)
            cfg = canonical_config(doc)
        return run(cfg, verbose=args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
