"""Estimators and verifiers for log-periodic tail/transform asymptotics.

Estimation: sample the normalized ratio U(r**n z)/((r**n z)**rho ell(...))
on a geometric grid and extrapolate along n per z with an iterated-Aitken
window; diverging or vanishing ratio tracks are flagged with their growth
exponent instead of being averaged away.  The per-z limits assemble into a
periodic modulation function.

Verification suites re-run both sides of an asymptotic equivalence and
check the connecting operator identity (A for tail-vs-transform, B for
density-vs-integral, the moment-remainder relations for distribution
tails), reporting one clause per conclusion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .core import (
    FourierSeg,
    GeometricGrid,
    PeriodicFn,
    SlowlyVaryingFn,
    check_class_membership,
)
from . import csvio
from .laplace import (
    StieltjesMeasure,
    ls_transform,
    moment,
    moment_remainders,
    truncated_moment,
    weighted_transform,
)
from .operators import (
    DEFAULT_CONFIG,
    OperatorConfig,
    apply_A,
    apply_B,
    apply_B_inv,
)

__all__ = [
    "EstimatorConfig",
    "TailEstimate",
    "ClauseResult",
    "EquivalenceReport",
    "aitken_limit",
    "estimate_tail_limit",
    "estimate_transform_limit",
    "fit_periodic",
    "verify_tauberian",
    "verify_karamata_suite",
    "verify_monotone_density",
    "bd_equivalence_suite",
]


@dataclass(frozen=True)
class EstimatorConfig:
    window: int = 8
    convergence_rtol: float = 5e-4
    divergence_slope: float = 0.05  # in units of log r per step
    monotone_rtol: float = 1e-9
    fit_harmonics: int = 8
    fit_residual_rtol: float = 2e-3
    offlattice_delta: float = 0.37
    probe_lambdas: tuple = (2.0, 5.0)
    operator: OperatorConfig = DEFAULT_CONFIG


DEFAULT_ESTIMATOR = EstimatorConfig()


def aitken_limit(seq, rtol: float) -> tuple[float, bool, float]:
    """Iterated Aitken delta-squared on a short window.

    Returns (limit, converged, last_gap).  Convergence means the last two
    accelerated values agree to rtol relative to the sequence scale.
    """
    work = [float(v) for v in seq if math.isfinite(v)]
    if not work:
        return math.nan, False, math.inf
    if len(work) == 1:
        return work[0], False, math.inf
    scale = max(max(abs(v) for v in work), 1e-300)
    while len(work) >= 3:
        nxt = []
        for i in range(len(work) - 2):
            d1 = work[i + 1] - work[i]
            d2 = work[i + 2] - work[i + 1]
            den = d2 - d1
            if abs(den) <= 1e-15 * scale:
                nxt.append(work[i + 2])
            else:
                nxt.append(work[i + 2] - d2 * d2 / den)
        work = nxt
    gap = abs(work[-1] - work[-2])
    tol = rtol * max(abs(work[-1]), 1e-3 * scale)
    return work[-1], gap <= tol, gap


@dataclass(frozen=True)
class ZDiagnostic:
    z: float
    limit: float
    converged: bool
    gap: float
    note: str = ""


@dataclass(frozen=True)
class TailEstimate:
    """Per-z extrapolated limits of a normalized ratio table."""

    r: float
    rho: float
    side: str            # 'tail' or 'transform'
    direction: str       # 'infinity' or 'zero' (location of the x-limit)
    z_points: tuple
    n_values: tuple
    table: np.ndarray    # ratio values, shape (z, n); nan where unavailable
    diagnostics: tuple   # of ZDiagnostic, one per z
    monotone_ok: bool
    monotone_note: str
    excursions: tuple    # per-n sup over z of the ratio (bounded-ness diagnostic)

    @property
    def converged_mask(self) -> np.ndarray:
        return np.array([d.converged for d in self.diagnostics])

    @property
    def limits(self) -> np.ndarray:
        return np.array([d.limit for d in self.diagnostics])

    @property
    def all_converged(self) -> bool:
        return bool(self.converged_mask.all())

    def limit_scale(self) -> float:
        vals = self.limits[self.converged_mask]
        if vals.size == 0:
            return 1.0
        return float(max(np.max(np.abs(vals)), 1e-300))

    def limit_table(self, mode: str = "step") -> PeriodicFn:
        mask = self.converged_mask
        if mask.sum() < 2:
            raise ValueError("too few converged z-points to tabulate a limit")
        z = np.asarray(self.z_points)[mask]
        v = self.limits[mask]
        order = np.argsort(z)
        return PeriodicFn.from_samples(z[order], v[order], self.r, mode=mode)

    def is_unbounded(self, factor: float = 5.0) -> bool:
        exc = np.asarray(self.excursions)
        exc = exc[np.isfinite(exc)]
        if exc.size == 0:
            return False
        return bool(np.max(exc) > factor * self.limit_scale())

    def to_rows(self):
        header = ["z", "limit", "converged", "gap", "note"]
        rows = [[d.z, d.limit, int(d.converged), d.gap, d.note]
                for d in self.diagnostics]
        return header, rows


def _abscissa(r: float, n: int, z: float, side: str, direction: str) -> float:
    sign = 1 if direction == "infinity" else -1
    if side == "transform":
        sign = -sign
    return r ** (sign * n) * z


def _ratio_table(fn, ell, rho, grid, side, direction):
    r = grid.r
    zs = list(grid.z_points)
    ns = list(grid.n_values)
    table = np.full((len(zs), len(ns)), np.nan)
    for i, z in enumerate(zs):
        for j, n in enumerate(ns):
            x = _abscissa(r, int(n), float(z), side, direction)
            try:
                raw = fn(x)
                if side == "tail":
                    denom = x**rho * ell(x)
                else:
                    denom = x ** (-rho) * ell(1.0 / x)
                table[i, j] = raw / denom
            except (OverflowError, ValueError, ZeroDivisionError):
                continue
    return np.asarray(zs), np.asarray(ns), table


def _extrapolate(zs, ns, table, r, rho, side, direction, config) -> tuple:
    diags = []
    for i, z in enumerate(zs):
        row = table[i]
        valid = np.isfinite(row)
        seq = row[valid]
        if seq.size < 2:
            diags.append(ZDiagnostic(float(z), math.nan, False, math.inf,
                                     "too few valid points"))
            continue
        note = ""
        half = seq[seq.size // 2:]
        if half.size >= 3 and np.all(np.abs(half) > 0):
            logs = np.log(np.abs(half))
            steps = np.arange(half.size)
            slope = float(np.polyfit(steps, logs, 1)[0]) / math.log(r)
            if slope > config.divergence_slope:
                diags.append(ZDiagnostic(float(z), math.nan, False, math.inf,
                                         f"diverging, growth exponent {slope:.3g}"))
                continue
            if slope < -config.divergence_slope:
                note = "vanishing"
        window = seq[-config.window:]
        limit, conv, gap = aitken_limit(window, config.convergence_rtol)
        diags.append(ZDiagnostic(float(z), limit, conv, gap, note))
    return tuple(diags)


def _monotone_spot_check(fn, grid, side, direction, nondecreasing, rtol):
    """Sample the callable across the grid range and count order violations."""
    r = grid.r
    xs = sorted(
        _abscissa(r, int(n), float(z), side, direction)
        for z in list(grid.z_points)[:: max(1, len(grid.z_points) // 8)]
        for n in list(grid.n_values)[:: max(1, len(grid.n_values) // 6)]
    )
    vals = []
    for x in xs:
        try:
            vals.append((x, fn(x)))
        except (OverflowError, ValueError, ZeroDivisionError):
            continue
    bad = 0
    scale = max((abs(v) for _, v in vals), default=1.0)
    for (_, v0), (_, v1) in zip(vals, vals[1:]):
        diff = v1 - v0 if nondecreasing else v0 - v1
        if diff < -rtol * scale:
            bad += 1
    ok = bad == 0
    word = "nondecreasing" if nondecreasing else "nonincreasing"
    note = (f"{word} on {len(vals)} sampled points (range-limited check)"
            if ok else f"{bad} {word}-violations on {len(vals)} sampled points")
    return ok, note


def estimate_tail_limit(U, ell: SlowlyVaryingFn, rho: float, grid: GeometricGrid,
                        direction: str = "infinity",
                        config: EstimatorConfig = DEFAULT_ESTIMATOR,
                        monotone: str = "auto") -> TailEstimate:
    """Extrapolate U(x)/(x**rho ell(x)) along the geometric lattice x = r**(+-n) z."""
    if direction not in ("infinity", "zero"):
        raise ValueError("direction must be 'infinity' or 'zero'")
    zs, ns, table = _ratio_table(U, ell, rho, grid, "tail", direction)
    diags = _extrapolate(zs, ns, table, grid.r, rho, "tail", direction, config)
    if monotone == "skip":
        mono_ok, mono_note = True, "monotonicity check skipped"
    else:
        nondec = rho >= 0 if monotone == "auto" else monotone == "nondecreasing"
        mono_ok, mono_note = _monotone_spot_check(
            U, grid, "tail", direction, nondec, config.monotone_rtol)
    with np.errstate(all="ignore"):
        excursions = tuple(
            float(np.nanmax(table[:, j])) if np.isfinite(table[:, j]).any() else math.nan
            for j in range(table.shape[1])
        )
    return TailEstimate(
        r=grid.r, rho=rho, side="tail", direction=direction,
        z_points=tuple(float(z) for z in zs), n_values=tuple(int(n) for n in ns),
        table=table, diagnostics=diags, monotone_ok=mono_ok,
        monotone_note=mono_note, excursions=excursions,
    )


def estimate_transform_limit(Uhat, ell: SlowlyVaryingFn, rho: float,
                             grid: GeometricGrid, direction: str = "zero",
                             config: EstimatorConfig = DEFAULT_ESTIMATOR) -> TailEstimate:
    """Extrapolate Uhat(s) * s**rho / ell(1/s) along s = r**(-+n) z.

    direction names the limit of s: 'zero' pairs with tails at infinity,
    'infinity' with tails at zero.
    """
    if direction not in ("infinity", "zero"):
        raise ValueError("direction must be 'infinity' or 'zero'")
    # in _ratio_table's terms the transform side flips the exponent sign
    zs, ns, table = _ratio_table(Uhat, ell, rho, grid, "transform",
                                 "infinity" if direction == "zero" else "zero")
    diags = _extrapolate(zs, ns, table, grid.r, rho, "transform", direction, config)
    with np.errstate(all="ignore"):
        excursions = tuple(
            float(np.nanmax(table[:, j])) if np.isfinite(table[:, j]).any() else math.nan
            for j in range(table.shape[1])
        )
    return TailEstimate(
        r=grid.r, rho=rho, side="transform", direction=direction,
        z_points=tuple(float(z) for z in zs), n_values=tuple(int(n) for n in ns),
        table=table, diagnostics=diags, monotone_ok=True,
        monotone_note="not applicable on the transform side", excursions=excursions,
    )


# ---------------------------------------------------------------------------
# fitting estimated limits with closed-form periodic segments
# ---------------------------------------------------------------------------


def _fit_fourier(z, v, r, harmonics):
    u = np.log(z) / math.log(r)
    cols = [np.ones_like(u)]
    for j in range(1, harmonics + 1):
        cols.append(np.cos(2 * math.pi * j * u))
        cols.append(np.sin(2 * math.pi * j * u))
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    resid = design @ coef - v
    seg = FourierSeg(
        omega0=2 * math.pi / math.log(r),
        a0=float(coef[0]),
        acos=tuple(float(c) for c in coef[1::2]),
        bsin=tuple(float(c) for c in coef[2::2]),
    )
    fn = PeriodicFn(r=float(r), segments=((1.0, seg),))
    return fn, float(np.sqrt(np.mean(resid**2)))


def _fit_power(z, v, r):
    if np.any(v <= 0):
        return None, math.inf
    logs = np.log(v)
    logz = np.log(z)
    coef = np.polyfit(logz, logs, 1)
    fn = PeriodicFn.power(float(math.exp(coef[1])), float(coef[0]), r)
    resid = coef[0] * logz + coef[1] - logs
    return fn, float(np.sqrt(np.mean(resid**2)) * max(abs(np.max(v)), 1e-300))


def fit_periodic(z, values, r, config: EstimatorConfig = DEFAULT_ESTIMATOR):
    """Best closed-form periodic fit: Fourier vs pure power vs step table.

    Returns (fn, kind, rms_residual); the step table is the fallback and is
    exact at the samples but not differentiable.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(values, dtype=float)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    harmonics = min(config.fit_harmonics, max(1, (len(z) - 2) // 2))
    four, res_f = _fit_fourier(z, v, r, harmonics)
    pow_fn, res_p = _fit_power(z, v, r)
    best, kind, res = four, "fourier", res_f
    if res_p < res_f:
        best, kind, res = pow_fn, "power", res_p
    if res <= config.fit_residual_rtol * scale:
        return best, kind, res
    order = np.argsort(z)
    table = PeriodicFn.from_samples(z[order], v[order], r, mode="step")
    return table, "table-step", 0.0


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClauseResult:
    name: str
    status: str  # 'pass' | 'fail' | 'inconclusive' | 'skipped'
    discrepancy: float = math.nan
    tol: float = math.nan
    note: str = ""

    def line(self) -> str:
        tag = {"pass": "PASS", "fail": "FAIL",
               "inconclusive": "INCONCLUSIVE", "skipped": "SKIP"}[self.status]
        parts = [f"[{tag}] {self.name}"]
        if math.isfinite(self.discrepancy):
            parts.append(f"discrepancy {self.discrepancy:.3e}")
        if math.isfinite(self.tol):
            parts.append(f"tol {self.tol:.1e}")
        if self.note:
            parts.append(f"({self.note})")
        return " ".join(parts)


@dataclass(frozen=True)
class EquivalenceReport:
    suite: str
    rho: float
    clauses: tuple
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (not any(c.status == "fail" for c in self.clauses)
                and any(c.status == "pass" for c in self.clauses)
                and not any(c.status == "inconclusive" for c in self.clauses))

    @property
    def verdict(self) -> str:
        if any(c.status == "fail" for c in self.clauses):
            return "fail"
        if any(c.status == "inconclusive" for c in self.clauses):
            return "inconclusive"
        return "pass"

    def render_text(self) -> str:
        head = f"suite {self.suite} (rho={self.rho:g})"
        if self.params:
            head += " " + " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        lines = [head, "-" * len(head)]
        lines += [c.line() for c in self.clauses]
        lines.append(f"verdict: {self.verdict.upper()}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "rho": self.rho,
            "params": {k: (v if not isinstance(v, float) else csvio.fmt(v))
                       for k, v in sorted(self.params.items())},
            "verdict": self.verdict,
            "clauses": [
                {
                    "name": c.name, "status": c.status,
                    "discrepancy": csvio.fmt(c.discrepancy),
                    "tol": csvio.fmt(c.tol), "note": c.note,
                }
                for c in self.clauses
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _clause_sup(name, got, want, tol, note=""):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    disc = float(np.max(np.abs(got - want))) if got.size else math.nan
    status = "pass" if disc <= tol else "fail"
    return ClauseResult(name, status, disc, tol, note)


def _clause_constant(name, values, tol, note=""):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return ClauseResult(name, "inconclusive", note="no converged values")
    spread = float(np.max(v) - np.min(v))
    status = "pass" if spread <= tol * max(abs(float(np.mean(v))), 1e-300) + tol else "fail"
    return ClauseResult(name, status, spread, tol, note)


def _estimation_clause(name, est: TailEstimate):
    n_ok = int(est.converged_mask.sum())
    n_all = len(est.z_points)
    if n_ok == n_all:
        return None
    if n_ok < max(2, n_all // 2):
        return ClauseResult(name, "inconclusive", note=(
            f"only {n_ok}/{n_all} z-points converged"))
    return ClauseResult(name, "pass", note=(
        f"{n_ok}/{n_all} z-points converged; rest excluded"), tol=math.nan)


# ---------------------------------------------------------------------------
# verifier suites
# ---------------------------------------------------------------------------


def verify_tauberian(target, ell: SlowlyVaryingFn, rho: float, grid: GeometricGrid,
                     tol: float = 5e-3,
                     config: EstimatorConfig = DEFAULT_ESTIMATOR) -> EquivalenceReport:
    """Check the tail/transform equivalence through the connecting operator.

    target is either a StieltjesMeasure (U = mu((0, x]), Uhat = its
    transform) or a pair (U, Uhat) of callables.  For rho > 0 the clause is
    sup |A_rho p_hat - q_hat| <= tol; for rho = 0 both limits must be equal
    constants.  When the fitted p is continuous, the pointwise asymptotic
    U(x) ~ x**rho ell(x) p(x) is also spot-checked off the sampling lattice.
    """
    if rho < 0:
        raise ValueError("rho must be >= 0 here; negative rho belongs to the "
                         "Karamata suite in rho-negative mode")
    if isinstance(target, StieltjesMeasure):
        mu = target
        U = lambda x: truncated_moment(mu, 0.0, x, "below")
        Uhat = lambda s: ls_transform(mu, s)
    else:
        U, Uhat = target
    clauses = []
    p_est = estimate_tail_limit(U, ell, rho, grid, config=config)
    q_est = estimate_transform_limit(Uhat, ell, rho, grid, config=config)
    for name, est in (("tail-estimation", p_est), ("transform-estimation", q_est)):
        extra = _estimation_clause(name, est)
        if extra is not None:
            clauses.append(extra)
    clauses.append(ClauseResult(
        "tail-nondecreasing", "pass" if p_est.monotone_ok else "fail",
        note=p_est.monotone_note))

    pm = p_est.converged_mask
    qm = q_est.converged_mask
    if pm.sum() < 2 or qm.sum() < 2:
        clauses.append(ClauseResult("transform-match", "inconclusive",
                                    note="estimation failed on too many z-points"))
        return EquivalenceReport("tauberian", rho, tuple(clauses))

    if rho == 0:
        clauses.append(_clause_constant("tail-limit-constant", p_est.limits[pm], tol,
                                        "rho=0 limits are constants"))
        clauses.append(_clause_constant("transform-limit-constant", q_est.limits[qm], tol))
        p0 = float(np.mean(p_est.limits[pm]))
        q0 = float(np.mean(q_est.limits[qm]))
        clauses.append(_clause_sup("tail-equals-transform", [p0], [q0], tol,
                                   "p = q for rho = 0"))
        return EquivalenceReport("tauberian", rho, tuple(clauses))

    zs = np.asarray(p_est.z_points)[pm]
    fit, kind, res = fit_periodic(zs, p_est.limits[pm], grid.r, config)
    member = check_class_membership(fit, "P_r_rho", rho=rho, tol=1e-7)
    clauses.append(ClauseResult(
        "tail-limit-class", "pass" if member.passed else "fail",
        note=f"fit kind {kind}; " + ("all conditions hold" if member.passed
             else ", ".join(c.name for c in member.failing()))))
    op_cfg = replace(config.operator, check_membership=False)
    q_fit = apply_A(rho, fit, op_cfg)
    qz = np.asarray(q_est.z_points)[qm]
    a_vals = np.array([q_fit(float(z)) for z in qz])
    clauses.append(_clause_sup("transform-match", a_vals, q_est.limits[qm], tol,
                               f"A applied to {kind}-fitted tail limit"))

    if fit.is_continuous():
        r = grid.r
        n_top = int(p_est.n_values[-1])
        checks = []
        wants = []
        for z in zs[:: max(1, len(zs) // 6)]:
            z_off = float(z) * r**config.offlattice_delta
            n_use = n_top - 1 if z_off >= r else n_top
            z_red = z_off / r if z_off >= r else z_off
            x = r**n_use * z_red
            try:
                checks.append(U(x) / (x**rho * ell(x)))
                wants.append(fit.value_in_period(z_red))
            except (OverflowError, ValueError, ZeroDivisionError):
                continue
        if checks:
            clauses.append(_clause_sup(
                "continuity-strengthening", checks, wants, max(tol, 10 * res),
                "pointwise asymptotics off the sampling lattice"))
    return EquivalenceReport("tauberian", rho, tuple(clauses))


def _cumulative_below(u, xs, quad_rtol=1e-10):
    """U(x) = integral_0^x u for each x in ascending xs, by stitched quadrature."""
    xs = np.asarray(xs)
    vals = np.empty(xs.size)
    head, _ = integrate.quad(u, 0.0, xs[0], epsabs=0.0, epsrel=quad_rtol, limit=400)
    acc = head
    vals[0] = acc
    for i in range(1, xs.size):
        piece, _ = integrate.quad(u, xs[i - 1], xs[i],
                                  epsabs=0.0, epsrel=quad_rtol, limit=400)
        acc += piece
        vals[i] = acc
    return vals


def _cumulative_above(u, xs, r=2.0, quad_rtol=1e-10):
    """U(x) = integral_x^inf u for each x in ascending xs.

    quad straight to infinity is unreliable for oscillating regularly
    varying integrands, so the unbounded piece is summed over geometric
    blocks [X r^j, X r^(j+1)]; blocks of a periodically modulated power
    decay at the exact rate r**rho, so once consecutive ratios agree the
    remaining series is completed geometrically.
    """
    xs = np.asarray(xs)
    lo = float(xs[-1])
    blocks = []
    for _ in range(400):
        hi = lo * r
        piece, _ = integrate.quad(u, lo, hi, epsabs=0.0, epsrel=quad_rtol, limit=200)
        blocks.append(piece)
        lo = hi
        if piece == 0.0:
            break
        if len(blocks) >= 3 and blocks[-2] > 0 and blocks[-3] > 0:
            c1 = blocks[-1] / blocks[-2]
            c0 = blocks[-2] / blocks[-3]
            if c1 < 0.999 and abs(c1 - c0) <= 1e-9 * c1:
                break
    tail = sum(blocks)
    if len(blocks) >= 2 and 0.0 < blocks[-1] < blocks[-2]:
        c = blocks[-1] / blocks[-2]
        tail += blocks[-1] * c / (1.0 - c)
    vals = np.empty(xs.size)
    acc = tail
    vals[-1] = acc
    for i in range(xs.size - 2, -1, -1):
        piece, _ = integrate.quad(u, xs[i], xs[i + 1],
                                  epsabs=0.0, epsrel=quad_rtol, limit=400)
        acc += piece
        vals[i] = acc
    return vals


def _interp_callable(xs, vals):
    logx = np.log(xs)

    def U(x):
        lx = math.log(x)
        if lx < logx[0] or lx > logx[-1]:
            raise ValueError("outside tabulated range")
        return float(np.interp(lx, logx, vals))

    return U


def _grid_abscissae(grid, direction):
    xs = sorted(
        set(
            _abscissa(grid.r, int(n), float(z), "tail", direction)
            for z in grid.z_points
            for n in grid.n_values
        )
    )
    return np.asarray(xs)


def verify_karamata_suite(u, ell: SlowlyVaryingFn, rho: float, mode: str,
                          grid: GeometricGrid, tol: float = 5e-3,
                          config: EstimatorConfig = DEFAULT_ESTIMATOR) -> EquivalenceReport:
    """Density-vs-integral transfer in four modes.

    mode 'direct' (rho > 0): U(x) = integral_0^x u, conclusion p = B_rho p0.
    mode 'rho0': U slowly varying, U/ell -> infinity, x u(x)/ell(x) -> const.
    mode 'rho-negative' (rho < 0): U(x) = integral_x^inf u, same B identity.
    mode 'at-zero': the x -> 0 analogue of 'direct' (ell slowly varying at 0).
    """
    if mode not in ("direct", "rho0", "rho-negative", "at-zero"):
        raise ValueError(f"unknown mode {mode!r}")
    clauses = []
    direction = "zero" if mode == "at-zero" else "infinity"
    xs = _grid_abscissae(grid, direction)

    if mode == "rho0":
        Uv = _cumulative_below(u, xs)
        U = _interp_callable(xs, Uv)
        # U(lam x)/U(x) -> 1, but only logarithmically for U ~ log:
        # extrapolate the ratio along a geometric x-sequence
        probes = []
        for lam in config.probe_lambdas:
            seq = []
            x = xs[-1] / lam
            while x >= xs[0] and len(seq) < 12:
                seq.append(U(lam * x) / U(x))
                x /= grid.r
            lim, _, _ = aitken_limit(seq[::-1], config.convergence_rtol)
            probes.append(lim)
        clauses.append(_clause_sup("integral-slowly-varying", probes,
                                   np.ones(len(probes)), 10 * tol,
                                   f"extrapolated probe ratios at "
                                   f"lambda={config.probe_lambdas}"))
        growth = [Uv[i] / ell(xs[i]) for i in range(0, xs.size, max(1, xs.size // 8))]
        diverges = all(b > a for a, b in zip(growth, growth[1:])) and growth[-1] > 5 * growth[0]
        clauses.append(ClauseResult(
            "integral-dominates-ell", "pass" if diverges else "fail",
            note=f"U/ell grew from {growth[0]:.3g} to {growth[-1]:.3g} on the sampled range"))
        dens = estimate_tail_limit(lambda x: x * u(x), ell, 0.0, grid, config=config,
                                   monotone="skip")
        extra = _estimation_clause("density-estimation", dens)
        if extra is not None:
            clauses.append(extra)
        dm = dens.converged_mask
        if dm.sum() >= 2:
            clauses.append(_clause_constant("density-limit-constant",
                                            dens.limits[dm], tol,
                                            "x u(x)/ell(x) has a constant limit"))
        else:
            clauses.append(ClauseResult("density-limit-constant", "inconclusive",
                                        note="density estimates did not converge"))
        return EquivalenceReport("karamata", 0.0, tuple(clauses), {"mode": mode})

    if mode == "rho-negative":
        if rho >= 0:
            raise ValueError("rho-negative mode needs rho < 0")
        Uv = _cumulative_above(u, xs, r=grid.r)
        nondec = False
    else:
        if rho <= 0:
            raise ValueError(f"mode {mode!r} needs rho > 0")
        Uv = _cumulative_below(u, xs)
        nondec = True
    U = _interp_callable(xs, Uv)

    # ultimately-monotone spot check on the density per the theorem hypothesis
    mono_ok, mono_note = _monotone_spot_check(
        u, grid, "tail", direction,
        nondecreasing=(rho - 1.0 >= 0), rtol=config.monotone_rtol)
    clauses.append(ClauseResult("density-ultimately-monotone",
                                "pass" if mono_ok else "inconclusive",
                                note=mono_note))
    if mode == "direct":
        lam = 1.05
        hi = xs[int(xs.size * 0.75)]
        ratios = [u(lam * x) / u(x) for x in (hi, xs[-2])]
        ok = all(rr < lam ** abs(rho) * 5 for rr in ratios)
        clauses.append(ClauseResult(
            "density-ratio-bounded", "pass" if ok else "fail",
            note=f"u(1.05x)/u(x) max {max(ratios):.3g} at large x (range-limited)"))

    p0_est = estimate_tail_limit(u, ell, rho - 1.0, grid, direction=direction,
                                 config=config, monotone="skip")
    p_est = estimate_tail_limit(U, ell, rho, grid, direction=direction,
                                config=config, monotone="skip")
    for name, est in (("density-estimation", p0_est), ("integral-estimation", p_est)):
        extra = _estimation_clause(name, est)
        if extra is not None:
            clauses.append(extra)
    m0 = p0_est.converged_mask
    m1 = p_est.converged_mask
    if m0.sum() < 2 or m1.sum() < 2:
        clauses.append(ClauseResult("integral-matches-B-of-density", "inconclusive",
                                    note="estimation failed"))
        return EquivalenceReport("karamata", rho, tuple(clauses), {"mode": mode})

    z0 = np.asarray(p0_est.z_points)[m0]
    fit0, kind0, _ = fit_periodic(z0, p0_est.limits[m0], grid.r, config)
    op_cfg = replace(config.operator, check_membership=False)
    Bp0 = apply_B(rho, fit0, op_cfg)
    z1 = np.asarray(p_est.z_points)[m1]
    want = np.array([Bp0.value_in_period(float(z)) for z in z1])
    clauses.append(_clause_sup("integral-matches-B-of-density",
                               p_est.limits[m1], want, tol,
                               f"B applied to {kind0}-fitted density limit"))
    # the integral-side limit is continuous; spot-check off the z-lattice
    mid = np.sqrt(z1[:-1] * z1[1:])[:: max(1, (m1.sum() - 1) // 4)]
    got = []
    wanted = []
    n_use = int(p_est.n_values[-1]) - 1
    for z in mid:
        x = _abscissa(grid.r, n_use, float(z), "tail", direction)
        try:
            got.append(U(x) / (x**rho * ell(x)))
            wanted.append(Bp0.value_in_period(float(z)))
        except (OverflowError, ValueError, ZeroDivisionError):
            continue
    if got:
        clauses.append(_clause_sup("integral-limit-continuity", got, wanted,
                                   max(tol, 5 * config.convergence_rtol),
                                   "off-lattice z spot check"))
    return EquivalenceReport("karamata", rho, tuple(clauses), {"mode": mode})


def verify_monotone_density(U, u, ell: SlowlyVaryingFn, rho: float,
                            grid: GeometricGrid, tol: float = 5e-3,
                            config: EstimatorConfig = DEFAULT_ESTIMATOR) -> EquivalenceReport:
    """From integral asymptotics down to the density: p0 = B_inv(rho, p).

    U must be the running integral of u; that and the ultimate monotonicity
    of u are spot-checked.  The fitted p must be smooth enough to
    differentiate -- otherwise the suite is inconclusive, not failed.
    """
    if rho < 0:
        raise ValueError("rho must be >= 0")
    clauses = []
    xs = _grid_abscissae(grid, "infinity")
    picks = xs[:: max(1, xs.size // 5)]
    got = []
    want = []
    for x0, x1 in zip(picks, picks[1:]):
        piece, _ = integrate.quad(u, x0, x1, epsabs=0.0, epsrel=1e-10, limit=400)
        got.append(U(x1) - U(x0))
        want.append(piece)
    scale = max(max(abs(v) for v in want), 1e-300)
    disc = max(abs(a - b) for a, b in zip(got, want)) / scale
    clauses.append(ClauseResult(
        "integral-consistency", "pass" if disc < 1e-6 else "fail", disc, 1e-6,
        "U increments vs quadrature of u"))
    mono_ok, mono_note = _monotone_spot_check(
        u, grid, "tail", "infinity", nondecreasing=(rho - 1.0 >= 0),
        rtol=config.monotone_rtol)
    clauses.append(ClauseResult("density-ultimately-monotone",
                                "pass" if mono_ok else "inconclusive", note=mono_note))

    if rho == 0:
        dens = estimate_tail_limit(lambda x: x * u(x), ell, 0.0, grid,
                                   config=config, monotone="skip")
        dm = dens.converged_mask
        vals = np.abs(dens.limits[dm]) if dm.sum() else np.array([math.inf])
        status = "pass" if np.all(vals <= tol) else "fail"
        clauses.append(ClauseResult("zero-density-limit", status,
                                    float(np.max(vals)), tol,
                                    "rho=0 forces p0 == 0"))
        return EquivalenceReport("monotone-density", rho, tuple(clauses))

    p_est = estimate_tail_limit(U, ell, rho, grid, config=config)
    extra = _estimation_clause("integral-estimation", p_est)
    if extra is not None:
        clauses.append(extra)
    pm = p_est.converged_mask
    if pm.sum() < 4:
        clauses.append(ClauseResult("density-matches-B-inv", "inconclusive",
                                    note="integral-side estimation failed"))
        return EquivalenceReport("monotone-density", rho, tuple(clauses))
    zs = np.asarray(p_est.z_points)[pm]
    fit, kind, res = fit_periodic(zs, p_est.limits[pm], grid.r, config)
    if kind == "table-step":
        clauses.append(ClauseResult(
            "density-matches-B-inv", "inconclusive",
            note="integral limit not smoothable by fourier/power fit; "
                 "a differentiable p is required to invert B"))
        return EquivalenceReport("monotone-density", rho, tuple(clauses))
    p0_fit = apply_B_inv(rho, fit, config.operator)
    p0_est = estimate_tail_limit(u, ell, rho - 1.0, grid, config=config,
                                 monotone="skip")
    m0 = p0_est.converged_mask
    if m0.sum() < 2:
        clauses.append(ClauseResult("density-matches-B-inv", "inconclusive",
                                    note="density-side estimation failed"))
        return EquivalenceReport("monotone-density", rho, tuple(clauses))
    z0 = np.asarray(p0_est.z_points)[m0]
    want = np.array([p0_fit.value_in_period(float(z)) for z in z0])
    clauses.append(_clause_sup("density-matches-B-inv", p0_est.limits[m0], want, tol,
                               f"B_inv of the {kind}-fitted integral limit"))
    return EquivalenceReport("monotone-density", rho, tuple(clauses))


def bd_equivalence_suite(F: StieltjesMeasure, m: int, beta: float,
                         grid: GeometricGrid, tol: float = 5e-3,
                         ell: SlowlyVaryingFn | None = None,
                         config: EstimatorConfig = DEFAULT_ESTIMATOR) -> EquivalenceReport:
    """Moment-remainder equivalences for a probability distribution tail.

    alpha = m + beta.  Exercises the moment-remainder transform estimates
    (both computation routes), the tail-side counterpart for beta in {0},
    (0,1), {1}, the derivative route for beta > 0, and the connecting
    operator relations between the estimated modulations.
    """
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if ell is None:
        ell = SlowlyVaryingFn()
    alpha = m + beta
    clauses = []
    mu_m = moment(F, float(m))
    if not math.isfinite(mu_m):
        raise ValueError("m-th moment must be finite")

    def rem(s):
        return moment_remainders(F, m, s)

    if m == 0:
        # both remainders compute the same quantity; the routes must agree
        worst = 0.0
        for s in (grid.r ** (-n) for n in (2, 5, 9)):
            rr = rem(s)
            worst = max(worst, abs(rr.f - rr.g) / max(abs(rr.g), 1e-300))
        clauses.append(ClauseResult(
            "remainder-routes-agree", "pass" if worst <= 1e-8 else "fail",
            worst, 1e-8, "alternating-sum route vs one-minus-exp kernel route"))
        f_side = lambda s: rem(s).g  # cancellation-free route
    else:
        # the two remainders differ: d/ds f_m = g_m; spot-check by central
        # differences at moderate s where the alternating sum is still clean
        worst = 0.0
        for s in (grid.r ** (-n) for n in (1, 2, 4)):
            h = 1e-4 * s
            dfds = (rem(s + h).f - rem(s - h).f) / (2.0 * h)
            gval = rem(s).g
            worst = max(worst, abs(dfds - gval) / max(abs(gval), 1e-300))
        clauses.append(ClauseResult(
            "remainder-derivative-identity", "pass" if worst <= 1e-6 else "fail",
            worst, 1e-6, "d/ds of the alternating-sum remainder equals the "
            "weighted one-minus-exp remainder"))
        f_side = lambda s: rem(s).f

    qt_est = estimate_transform_limit(f_side, ell, -alpha, grid, config=config)
    qt_mask = qt_est.converged_mask

    scale0 = max(abs(mu_m), 1.0)
    if qt_mask.sum() >= 2 and np.all(np.abs(qt_est.limits[qt_mask]) <= tol * scale0):
        clauses.append(ClauseResult(
            "degenerate-transform-limit", "pass", note=(
                "remainder vanishes at rate beyond s^alpha: all clauses "
                "degenerate to zero constants (finite higher moments)")))
        return EquivalenceReport("bd-equivalence", -alpha, tuple(clauses),
                                 {"m": m, "beta": beta, "status": "degenerate"})

    extra = _estimation_clause("remainder-transform-estimation", qt_est)
    if extra is not None:
        clauses.append(extra)

    op_cfg = replace(config.operator, check_membership=False)
    if m == 0:
        q_est = qt_est
        q_mask = qt_mask
    else:
        # the weighted remainder g_m carries the modulation at exponent beta
        q_est = estimate_transform_limit(lambda s: rem(s).g, ell, -beta,
                                         grid, config=config)
        q_mask = q_est.converged_mask
        extra = _estimation_clause("weighted-remainder-estimation", q_est)
        if extra is not None:
            clauses.append(extra)
        if 0.0 < beta < 1.0 and qt_mask.sum() >= 4 and q_mask.sum() >= 2:
            fit_qt, kind_qt, _ = fit_periodic(np.asarray(qt_est.z_points)[qt_mask],
                                              qt_est.limits[qt_mask], grid.r, config)
            if kind_qt != "table-step":
                rel = apply_B_inv(alpha, fit_qt, op_cfg)
                qz = np.asarray(q_est.z_points)[q_mask]
                want = np.array([rel.value_in_period(float(z)) for z in qz])
                clauses.append(_clause_sup(
                    "remainder-modulations-B-related", q_est.limits[q_mask], want,
                    tol, f"B_inv at alpha of the {kind_qt}-fitted f-side modulation"))
            else:
                clauses.append(ClauseResult(
                    "remainder-modulations-B-related", "inconclusive",
                    note="f-side modulation not smoothable"))

    # tail side, split by beta
    if beta == 0.0:
        tail_m = lambda x: truncated_moment(F, float(m), x, "above")
        t_est = estimate_tail_limit(tail_m, ell, 0.0, grid, config=config,
                                    monotone="skip")
        tm = t_est.converged_mask
        if tm.sum() >= 2:
            clauses.append(_clause_constant(
                "tail-moment-constant", t_est.limits[tm], tol,
                "beta=0: integral_x^inf y^m dF / ell is asymptotically constant"))
            if qt_mask.sum() >= 2:
                p_const = float(np.mean(t_est.limits[tm]))
                q_const = float(np.mean(qt_est.limits[qt_mask]))
                clauses.append(_clause_sup(
                    "tail-transform-constants-equal", [p_const], [q_const],
                    max(tol, 10 * config.convergence_rtol),
                    "both modulations collapse to the same constant"))
        else:
            clauses.append(ClauseResult("tail-moment-constant", "inconclusive",
                                        note="tail estimates did not converge"))
        if qt_mask.sum() >= 2:
            clauses.append(_clause_constant(
                "remainder-limit-constant", qt_est.limits[qt_mask], tol,
                "beta=0 forces a constant transform modulation"))
        return EquivalenceReport("bd-equivalence", -alpha, tuple(clauses),
                                 {"m": m, "beta": beta})

    if beta == 1.0:
        trunc = lambda x: truncated_moment(F, float(m + 1), x, "below")
        t_est = estimate_tail_limit(trunc, ell, 0.0, grid, config=config,
                                    monotone="skip")
        tm = t_est.converged_mask
        if tm.sum() >= 2:
            clauses.append(_clause_constant(
                "truncated-moment-constant", t_est.limits[tm], tol,
                "beta=1: integral_0^x y^(m+1) dF / ell is asymptotically constant"))
            if qt_mask.sum() >= 2:
                p_const = float(np.mean(t_est.limits[tm]))
                q_const = float(np.mean(qt_est.limits[qt_mask]))
                clauses.append(_clause_sup(
                    "tail-transform-constants-equal", [p_const], [q_const],
                    max(tol, 10 * config.convergence_rtol),
                    "both modulations collapse to the same constant"))
        else:
            clauses.append(ClauseResult("truncated-moment-constant", "inconclusive",
                                        note="truncated-moment estimates did not converge"))
        return EquivalenceReport("bd-equivalence", -alpha, tuple(clauses),
                                 {"m": m, "beta": beta})

    # 0 < beta < 1
    Fbar_m = lambda x: truncated_moment(F, float(m), x, "above")
    p_est = estimate_tail_limit(Fbar_m, ell, -beta, grid, config=config,
                                monotone="skip")
    pm = p_est.converged_mask
    extra = _estimation_clause("tail-estimation", p_est)
    if extra is not None:
        clauses.append(extra)
    if pm.sum() < 2 or q_mask.sum() < 2:
        clauses.append(ClauseResult("tail-transform-consistency", "inconclusive",
                                    note="estimation failed"))
        return EquivalenceReport("bd-equivalence", -alpha, tuple(clauses),
                                 {"m": m, "beta": beta})

    # transform side vs tail side through the operator chain at index beta:
    # the m-th tail integral x**beta-normalized plays the usual role of p
    zs = np.asarray(p_est.z_points)[pm]
    fitp, kindp, _ = fit_periodic(zs, p_est.limits[pm], grid.r, config)
    q_chain = apply_A(1.0 - beta, apply_B(1.0 - beta, fitp, op_cfg), op_cfg)
    qz = np.asarray(q_est.z_points)[q_mask]
    got = np.array([q_chain(float(z)) for z in qz])
    clauses.append(_clause_sup(
        "tail-transform-consistency", got, q_est.limits[q_mask], tol,
        f"operator chain applied to the {kindp}-fitted tail modulation"))

    # derivative route: integral x^(m+1) e^(-sx) dF ~ s^(beta-1) ell q_(m+1)
    h = lambda s: weighted_transform(F, float(m + 1), s)
    d_est = estimate_transform_limit(h, ell, 1.0 - beta, grid, config=config)
    dm_mask = d_est.converged_mask
    if dm_mask.sum() >= 2 and q_mask.sum() >= 4:
        fitq, kindq, _ = fit_periodic(np.asarray(q_est.z_points)[q_mask],
                                      q_est.limits[q_mask], grid.r, config)
        if kindq != "table-step":
            qd_fit = apply_B_inv(beta, fitq, op_cfg)
            dz = np.asarray(d_est.z_points)[dm_mask]
            want = np.array([qd_fit.value_in_period(float(z)) for z in dz])
            clauses.append(_clause_sup(
                "derivative-route", d_est.limits[dm_mask], want, tol,
                f"B_inv at beta of the {kindq}-fitted remainder modulation"))
        else:
            clauses.append(ClauseResult("derivative-route", "inconclusive",
                                        note="remainder modulation not smoothable"))

    if m == 1:
        # shift relation between the m=1 and m=0 tail modulations:
        # p0m = p + m * B_(-beta) p  with p the plain-tail modulation
        Fbar = lambda x: truncated_moment(F, 0.0, x, "above")
        pt_est = estimate_tail_limit(Fbar, ell, -alpha, grid, config=config,
                                     monotone="skip")
        ptm = pt_est.converged_mask
        if ptm.sum() >= 4:
            fit_pt, kind_pt, _ = fit_periodic(np.asarray(pt_est.z_points)[ptm],
                                              pt_est.limits[ptm], grid.r, config)
            shift = apply_B(-beta, fit_pt, op_cfg)
            want = np.array([
                fit_pt.value_in_period(float(z)) + m * shift.value_in_period(float(z))
                for z in zs
            ])
            clauses.append(_clause_sup(
                "m-shift-relation", p_est.limits[pm], want, tol,
                f"p0m = p + m B_(-beta) p with {kind_pt}-fitted plain tail"))
    return EquivalenceReport("bd-equivalence", -alpha, tuple(clauses),
                             {"m": m, "beta": beta})
