"""Function classes for log-periodic asymptotics.

A positive function p on (0, inf) is multiplicatively periodic with ratio
r > 1 if p(r*x) = p(x) for all x.  Such functions are represented here by
their restriction to a fundamental period [1, r), split into segments with
closed-form, tabulated, or callable values.  On top of that sit slowly
varying factors, the composite x^rho * ell(x) * p(x), and diagnostic
machinery: period reduction, membership checks for the monotone and
completely monotone classes, limit functions p*(lambda), and a coarse
regularity classification.

Conventions: period functions are right-continuous; the fundamental period
is the half-open interval [1, r); the wrap point compares p(1) against the
left limit at r.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Segment",
    "ConstantSeg",
    "PowerSeg",
    "CosLogSeg",
    "FourierSeg",
    "TableSeg",
    "CallableSeg",
    "PeriodicFn",
    "SlowlyVaryingFn",
    "RegLogPeriodic",
    "QClassFn",
    "GeometricGrid",
    "MembershipReport",
    "ConditionResult",
    "RegularityReport",
    "StarLimits",
    "reduce_to_period",
    "reduce_log_to_period",
    "eval_rlp",
    "eval_rlp_log",
    "check_class_membership",
    "compute_star_limits",
    "classify_regularity",
    "divided_difference_signs",
]

# Jumps smaller than this (relative to the function scale) are treated as
# continuity; larger ones as genuine atoms of the induced measure.
JUMP_TOL = 1e-9


def _as_float(x, name):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    return x


def reduce_to_period(x: float, r: float) -> tuple[int, float]:
    """Split x > 0 as x = r**n * z with z in [1, r).

    Returns (n, z).  The round trip r**n * z reproduces x to within one ulp
    because z is computed as x divided by the same floating value r**n.
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    if not r > 1:
        raise ValueError(f"ratio r must exceed 1, got {r}")
    n = int(math.floor(math.log(x) / math.log(r)))
    z = x / r**n
    # One step of correction each way guards against rounding in the log.
    while z < 1.0:
        n -= 1
        z = x / r**n
    while z >= r:
        n += 1
        z = x / r**n
    return n, z


def reduce_log_to_period(log_x: float, r: float) -> tuple[int, float]:
    """Period reduction for x given as log(x); for |log x| beyond float range."""
    if not r > 1:
        raise ValueError(f"ratio r must exceed 1, got {r}")
    lr = math.log(r)
    n = int(math.floor(log_x / lr))
    z = math.exp(log_x - n * lr)
    while z < 1.0:
        n -= 1
        z = math.exp(log_x - n * lr)
    while z >= r:
        n += 1
        z = math.exp(log_x - n * lr)
    return n, z


def _int_exp_cos(c: float, w: float, phase: float, t0: float, t1: float) -> float:
    """Exact integral of exp(c*t) * cos(w*t + phase) over [t0, t1]."""
    if w == 0.0:
        return math.cos(phase) * _int_exp(c, t0, t1)

    def anti(t):
        return math.exp(c * t) * (
            c * math.cos(w * t + phase) + w * math.sin(w * t + phase)
        ) / (c * c + w * w)

    return anti(t1) - anti(t0)


def _int_exp(c: float, t0: float, t1: float) -> float:
    if c == 0.0:
        return t1 - t0
    return (math.exp(c * t1) - math.exp(c * t0)) / c


class Segment:
    """One piece of a period function on [start, end) in period coordinates."""

    tag = "base"
    smooth = False

    def value(self, z: float) -> float:
        raise NotImplementedError

    def deriv(self, z: float):
        """Derivative at z, or None when not available in closed form."""
        return None

    def power_integral(self, c: float, a: float, b: float):
        """Exact integral of s**(c-1) * value(s) over [a, b], or None."""
        return None

    def to_json(self) -> dict:
        raise ValueError(f"segment form {self.tag!r} is not serializable")


@dataclass(frozen=True)
class ConstantSeg(Segment):
    c: float
    tag = "constant"
    smooth = True

    def value(self, z):
        return self.c

    def deriv(self, z):
        return 0.0

    def power_integral(self, c, a, b):
        return self.c * (_int_exp(c, math.log(a), math.log(b)))

    def to_json(self):
        return {"form": "constant", "value": self.c}


@dataclass(frozen=True)
class PowerSeg(Segment):
    scale: float
    exponent: float
    tag = "power"
    smooth = True

    def value(self, z):
        return self.scale * z**self.exponent

    def deriv(self, z):
        return self.scale * self.exponent * z ** (self.exponent - 1.0)

    def power_integral(self, c, a, b):
        return self.scale * _int_exp(c + self.exponent, math.log(a), math.log(b))

    def to_json(self):
        return {"form": "power", "scale": self.scale, "exponent": self.exponent}


@dataclass(frozen=True)
class CosLogSeg(Segment):
    """offset + amplitude * cos(omega * log(z) + phase).

    Periodicity of the enclosing PeriodicFn requires omega to be an integer
    multiple of 2*pi/log(r); the constructor of PeriodicFn checks this.
    """

    offset: float
    amplitude: float
    omega: float
    phase: float = 0.0
    tag = "coslog"
    smooth = True

    def value(self, z):
        return self.offset + self.amplitude * math.cos(
            self.omega * math.log(z) + self.phase
        )

    def deriv(self, z):
        return -self.amplitude * self.omega * math.sin(
            self.omega * math.log(z) + self.phase
        ) / z

    def power_integral(self, c, a, b):
        t0, t1 = math.log(a), math.log(b)
        out = self.offset * _int_exp(c, t0, t1)
        out += self.amplitude * _int_exp_cos(c, self.omega, self.phase, t0, t1)
        return out

    def to_json(self):
        return {
            "form": "coslog",
            "offset": self.offset,
            "amplitude": self.amplitude,
            "omega": self.omega,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class FourierSeg(Segment):
    """a0 + sum_j acos[j] cos((j+1) w0 log z) + bsin[j] sin((j+1) w0 log z)."""

    omega0: float
    a0: float
    acos: tuple
    bsin: tuple
    tag = "fourier"
    smooth = True

    def value(self, z):
        t = math.log(z)
        out = self.a0
        for j, (ac, bs) in enumerate(zip(self.acos, self.bsin)):
            w = (j + 1) * self.omega0
            out += ac * math.cos(w * t) + bs * math.sin(w * t)
        return out

    def deriv(self, z):
        t = math.log(z)
        out = 0.0
        for j, (ac, bs) in enumerate(zip(self.acos, self.bsin)):
            w = (j + 1) * self.omega0
            out += -ac * w * math.sin(w * t) + bs * w * math.cos(w * t)
        return out / z

    def power_integral(self, c, a, b):
        t0, t1 = math.log(a), math.log(b)
        out = self.a0 * _int_exp(c, t0, t1)
        for j, (ac, bs) in enumerate(zip(self.acos, self.bsin)):
            w = (j + 1) * self.omega0
            out += ac * _int_exp_cos(c, w, 0.0, t0, t1)
            out += bs * _int_exp_cos(c, w, -0.5 * math.pi, t0, t1)
        return out

    def to_json(self):
        return {
            "form": "fourier",
            "omega0": self.omega0,
            "a0": self.a0,
            "cos": list(self.acos),
            "sin": list(self.bsin),
        }


@dataclass(frozen=True)
class TableSeg(Segment):
    """Sampled values with a step (right-continuous) or linear interpolation rule."""

    knots: tuple
    values: tuple
    mode: str = "step"  # 'step' | 'linear'
    # linear mode only: value to interpolate toward at the right end of the
    # segment (periodic continuation); None clamps at the last knot.
    wrap_value: float | None = None
    tag = "table"

    def __post_init__(self):
        if self.mode not in ("step", "linear"):
            raise ValueError(f"unknown table mode {self.mode!r}")
        if len(self.knots) != len(self.values) or not self.knots:
            raise ValueError("knots and values must be equal-length and nonempty")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ValueError("knots must be strictly increasing")

    def _locate(self, z):
        i = bisect_right(self.knots, z) - 1
        return max(i, 0)

    def value(self, z):
        # Clamped evaluation; PeriodicFn routes linear-mode lookups through
        # value_with_end so the last gap can interpolate toward the wrap.
        i = self._locate(z)
        if self.mode == "step" or i + 1 >= len(self.knots):
            return self.values[i]
        z0, z1 = self.knots[i], self.knots[i + 1]
        v0, v1 = self.values[i], self.values[i + 1]
        if z <= z0:
            return v0
        return v0 + (v1 - v0) * (z - z0) / (z1 - z0)

    def value_with_end(self, z, seg_end):
        """Linear-mode value using the periodic wrap value on the last gap."""
        if self.mode == "step":
            return self.value(z)
        i = self._locate(z)
        if i + 1 < len(self.knots):
            z0, z1 = self.knots[i], self.knots[i + 1]
            v0, v1 = self.values[i], self.values[i + 1]
        else:
            z0, v0 = self.knots[-1], self.values[-1]
            if self.wrap_value is None:
                return v0
            z1, v1 = seg_end, self.wrap_value
        if z <= z0 or z1 == z0:
            return v0
        return v0 + (v1 - v0) * (z - z0) / (z1 - z0)

    def deriv_with_end(self, z, seg_end):
        if self.mode == "step":
            return 0.0
        i = self._locate(z)
        if i + 1 < len(self.knots):
            z0, z1 = self.knots[i], self.knots[i + 1]
            v0, v1 = self.values[i], self.values[i + 1]
        else:
            if self.wrap_value is None:
                return 0.0
            z0, v0 = self.knots[-1], self.values[-1]
            z1, v1 = seg_end, self.wrap_value
        if z1 == z0:
            return 0.0
        return (v1 - v0) / (z1 - z0)

    def to_json(self):
        out = {
            "form": "table",
            "mode": self.mode,
            "z": list(self.knots),
            "values": list(self.values),
        }
        if self.wrap_value is not None:
            out["wrap_value"] = self.wrap_value
        return out


@dataclass(frozen=True)
class CallableSeg(Segment):
    """Exact evaluator backed by a closure; used for operator outputs.

    Not JSON-serializable; tabulate first if a document form is needed.
    """

    fn: object
    dfn: object = None
    smooth_hint: bool = True
    tag = "callable"

    @property
    def smooth(self):
        return self.smooth_hint

    def value(self, z):
        return self.fn(z)

    def deriv(self, z):
        if self.dfn is None:
            return None
        return self.dfn(z)


def _segment_from_json(doc: dict) -> Segment:
    form = doc["form"]
    if form == "constant":
        return ConstantSeg(float(doc["value"]))
    if form == "power":
        return PowerSeg(float(doc["scale"]), float(doc["exponent"]))
    if form == "coslog":
        return CosLogSeg(
            float(doc["offset"]),
            float(doc["amplitude"]),
            float(doc["omega"]),
            float(doc.get("phase", 0.0)),
        )
    if form == "fourier":
        return FourierSeg(
            float(doc["omega0"]),
            float(doc["a0"]),
            tuple(float(v) for v in doc["cos"]),
            tuple(float(v) for v in doc["sin"]),
        )
    if form == "table":
        wrap = doc.get("wrap_value")
        return TableSeg(
            tuple(float(v) for v in doc["z"]),
            tuple(float(v) for v in doc["values"]),
            doc.get("mode", "step"),
            None if wrap is None else float(wrap),
        )
    raise ValueError(f"unknown segment form {form!r}")


@dataclass(frozen=True)
class PeriodicFn:
    """Multiplicatively periodic function with ratio r, given on [1, r).

    segments is a sorted tuple of (start, Segment); the first start must be
    1.0 and each segment extends to the next start (the last one to r).
    Evaluation reduces the argument to the fundamental period first, so
    periodicity holds exactly by construction.
    """

    r: float
    segments: tuple  # of (start, Segment)

    def __post_init__(self):
        if not self.r > 1:
            raise ValueError(f"ratio r must exceed 1, got {self.r}")
        if not self.segments:
            raise ValueError("need at least one segment")
        starts = [s for s, _ in self.segments]
        if starts[0] != 1.0:
            raise ValueError("first segment must start at z = 1")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment starts must be strictly increasing")
        if starts[-1] >= self.r:
            raise ValueError("segment starts must lie inside [1, r)")
        lr = math.log(self.r)
        for _, seg in self.segments:
            if isinstance(seg, CosLogSeg):
                k = seg.omega * lr / (2.0 * math.pi)
                if abs(k - round(k)) > 1e-9:
                    raise ValueError(
                        "coslog omega must be a multiple of 2*pi/log(r) "
                        "for the function to be periodic"
                    )
            if isinstance(seg, FourierSeg):
                k = seg.omega0 * lr / (2.0 * math.pi)
                if abs(k - round(k)) > 1e-9:
                    raise ValueError("fourier omega0 must be 2*pi/log(r) multiple")

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, c: float, r: float) -> "PeriodicFn":
        return cls(r=float(r), segments=((1.0, ConstantSeg(float(c))),))

    @classmethod
    def power(cls, scale: float, exponent: float, r: float) -> "PeriodicFn":
        return cls(r=float(r), segments=((1.0, PowerSeg(float(scale), float(exponent))),))

    @classmethod
    def coslog(
        cls, offset: float, amplitude: float, r: float, phase: float = 0.0,
        harmonic: int = 1,
    ) -> "PeriodicFn":
        omega = 2.0 * math.pi * harmonic / math.log(r)
        return cls(
            r=float(r),
            segments=((1.0, CosLogSeg(float(offset), float(amplitude), omega, float(phase))),),
        )

    @classmethod
    def from_samples(
        cls, z: "np.ndarray", values: "np.ndarray", r: float, mode: str = "linear",
        periodic_wrap: bool = True,
    ) -> "PeriodicFn":
        z = tuple(float(v) for v in z)
        values = tuple(float(v) for v in values)
        if z[0] != 1.0:
            # extend to the left edge of the period with the first value
            z = (1.0,) + z
            values = (values[0],) + values
        wrap = values[0] if (mode == "linear" and periodic_wrap) else None
        return cls(r=float(r), segments=((1.0, TableSeg(z, values, mode, wrap)),))

    @classmethod
    def from_callable(
        cls, fn, r: float, deriv=None, breakpoints: tuple = (), smooth: bool = True,
    ) -> "PeriodicFn":
        """Wrap an exact evaluator fn(z) for z in [1, r)."""
        pts = sorted(set([1.0] + [float(b) for b in breakpoints]))
        segs = tuple((b, CallableSeg(fn, deriv, smooth)) for b in pts)
        return cls(r=float(r), segments=segs)

    # -- evaluation ------------------------------------------------------

    def _locate(self, z: float) -> int:
        starts = [s for s, _ in self.segments]
        return max(bisect_right(starts, z) - 1, 0)

    def _seg_end(self, i: int) -> float:
        return self.segments[i + 1][0] if i + 1 < len(self.segments) else self.r

    def value_in_period(self, z: float) -> float:
        i = self._locate(z)
        seg = self.segments[i][1]
        if isinstance(seg, TableSeg):
            return seg.value_with_end(z, self._seg_end(i))
        return seg.value(z)

    def value(self, x: float) -> float:
        _, z = reduce_to_period(x, self.r)
        return self.value_in_period(z)

    __call__ = value

    def value_from_log(self, log_x: float) -> float:
        _, z = reduce_log_to_period(log_x, self.r)
        return self.value_in_period(z)

    def deriv_in_period(self, z: float):
        """d/dz of the period restriction; None if no closed form."""
        i = self._locate(z)
        seg = self.segments[i][1]
        if isinstance(seg, TableSeg):
            return seg.deriv_with_end(z, self._seg_end(i))
        return seg.deriv(z)

    # -- structure -------------------------------------------------------

    def breakpoints(self) -> tuple:
        """Interior breakpoints plus knots of tabulated segments (period coords)."""
        pts = [s for s, _ in self.segments[1:]]
        for i, (start, seg) in enumerate(self.segments):
            if isinstance(seg, TableSeg):
                pts.extend(k for k in seg.knots if start < k < self._seg_end(i))
        return tuple(sorted(set(pts)))

    def left_limit(self, b: float) -> float:
        """Left limit of the period restriction at b in (1, r]."""
        if not 1.0 < b <= self.r:
            raise ValueError("left limit defined on (1, r]")
        eps = b * 1e-13
        return self.value_in_period(min(b - eps, self.r * (1 - 1e-14)))

    def jumps(self, tol: float = JUMP_TOL) -> tuple:
        """Jump discontinuities ((z, delta)); includes the wrap at z = 1.

        delta is value-minus-left-limit; the wrap compares p(1) to the left
        limit at r.  Jumps below tol * scale are dropped.
        """
        scale = max(abs(self.value_in_period(1.0)), 1e-300)
        out = []
        wrap_delta = self.value_in_period(1.0) - self.left_limit(self.r)
        if abs(wrap_delta) > tol * scale:
            out.append((1.0, wrap_delta))
        for b in self.breakpoints():
            delta = self.value_in_period(b) - self.left_limit(b)
            if abs(delta) > tol * scale:
                out.append((b, delta))
        return tuple(out)

    def is_continuous(self, tol: float = JUMP_TOL) -> bool:
        return not self.jumps(tol)

    def sample_grid(self, n: int = 512) -> "np.ndarray":
        """Log-equispaced z in [1, r) refined near breakpoints and the wrap."""
        base = self.r ** (np.arange(n) / n)
        extra = []
        for b in self.breakpoints():
            extra.extend([b * (1 - 1e-9), b, b * (1 + 1e-9)])
        extra.extend([1.0 + 1e-12, self.r * (1 - 1e-9), self.r * (1 - 1e-12)])
        z = np.unique(np.clip(np.concatenate([base, extra]), 1.0, self.r * (1 - 1e-16)))
        return z

    def min_max(self, n: int = 2048) -> tuple[float, float]:
        z = self.sample_grid(n)
        vals = np.array([self.value_in_period(float(v)) for v in z])
        return float(vals.min()), float(vals.max())

    def tabulated(self, n: int = 256, mode: str = "linear") -> "PeriodicFn":
        z = self.r ** (np.arange(n) / n)
        vals = [self.value_in_period(float(v)) for v in z]
        return PeriodicFn.from_samples(z, vals, self.r, mode=mode)

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        segs = []
        for start, seg in self.segments:
            doc = seg.to_json()
            doc["start"] = start
            segs.append(doc)
        return {"r": self.r, "segments": segs}

    @classmethod
    def from_json(cls, doc: dict) -> "PeriodicFn":
        segs = tuple(
            (float(s["start"]), _segment_from_json(s)) for s in doc["segments"]
        )
        return cls(r=float(doc["r"]), segments=segs)


@dataclass(frozen=True)
class SlowlyVaryingFn:
    """Slowly varying factor: constant, (log_b x)^k, log log, or a callback.

    orientation is 'at-infinity' or 'at-zero'; at zero the built-in kinds
    are evaluated at 1/x so that positivity holds near the origin.
    """

    kind: str = "constant"
    value: float = 1.0
    exponent: float = 1.0
    base: float = math.e
    callback: object = None
    log_callback: object = None
    orientation: str = "at-infinity"

    def __post_init__(self):
        if self.kind not in ("constant", "log-power", "iterated-log", "custom"):
            raise ValueError(f"unknown slowly varying kind {self.kind!r}")
        if self.orientation not in ("at-infinity", "at-zero"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant slowly varying factor must be positive")
        if self.kind == "log-power" and not self.base > 1:
            raise ValueError("log base must exceed 1")
        if self.kind == "custom" and self.callback is None:
            raise ValueError("custom kind requires a callback")

    def _arg(self, x: float) -> float:
        return 1.0 / x if self.orientation == "at-zero" else x

    def __call__(self, x: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "custom":
            return self.callback(x)
        y = self._arg(x)
        if self.kind == "log-power":
            return (math.log(y) / math.log(self.base)) ** self.exponent
        return math.log(math.log(y))

    def log_value(self, log_x: float) -> float:
        """log(ell(x)) computed from log(x); supports huge arguments."""
        if self.kind == "constant":
            return math.log(self.value)
        if self.kind == "custom":
            if self.log_callback is None:
                raise ValueError("custom slowly varying factor lacks log_callback")
            return self.log_callback(log_x)
        ly = -log_x if self.orientation == "at-zero" else log_x
        if self.kind == "log-power":
            return self.exponent * math.log(ly / math.log(self.base))
        return math.log(math.log(ly))

    def probe_check(self, rtol: float = 1e-3) -> dict:
        """Sanity probe: ell(lambda x)/ell(x) near 1 at the extreme scale."""
        x = 1e-12 if self.orientation == "at-zero" else 1e12
        worst = 0.0
        for lam in (0.5, 2.0, 5.0):
            ratio = self(lam * x) / self(x)
            worst = max(worst, abs(ratio - 1.0))
        return {"x": x, "worst_deviation": worst, "passed": worst <= rtol}

    def to_json(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom slowly varying factors are not serializable")
        out = {"kind": self.kind, "orientation": self.orientation}
        if self.kind == "constant":
            out["value"] = self.value
        elif self.kind == "log-power":
            out["exponent"] = self.exponent
            out["base"] = self.base
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "SlowlyVaryingFn":
        kind = doc["kind"]
        return cls(
            kind=kind,
            value=float(doc.get("value", 1.0)),
            exponent=float(doc.get("exponent", 1.0)),
            base=float(doc.get("base", math.e)),
            orientation=doc.get("orientation", "at-infinity"),
        )


UNIT_SV = SlowlyVaryingFn()


@dataclass(frozen=True)
class RegLogPeriodic:
    """f(x) = x**rho * ell(x) * p(x) with p multiplicatively r-periodic."""

    rho: float
    ell: SlowlyVaryingFn
    p: PeriodicFn

    @property
    def r(self) -> float:
        return self.p.r

    def value(self, x: float) -> float:
        out = x**self.rho * self.ell(x) * self.p.value(x)
        if math.isinf(out):
            raise OverflowError(
                "linear-mode evaluation overflowed; use the log-domain variant"
            )
        return out

    __call__ = value

    def log_value(self, log_x: float) -> float:
        _, z = reduce_log_to_period(log_x, self.r)
        pz = self.p.value_in_period(z)
        if not pz > 0:
            raise ValueError("log-domain evaluation requires a positive period function")
        return self.rho * log_x + self.ell.log_value(log_x) + math.log(pz)

    def to_json(self) -> dict:
        return {"rho": self.rho, "ell": self.ell.to_json(), "p": self.p.to_json()}

    @classmethod
    def from_json(cls, doc: dict) -> "RegLogPeriodic":
        return cls(
            rho=float(doc["rho"]),
            ell=SlowlyVaryingFn.from_json(doc["ell"]),
            p=PeriodicFn.from_json(doc["p"]),
        )


def eval_rlp(f: RegLogPeriodic, x: float) -> float:
    return f.value(x)


def eval_rlp_log(f: RegLogPeriodic, log_x: float) -> float:
    return f.log_value(log_x)


# ---------------------------------------------------------------------------
# class membership
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    worst_violation: float = 0.0
    witness: float | None = None
    note: str = ""


@dataclass(frozen=True)
class MembershipReport:
    cls: str
    rho: float | None
    conditions: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failing(self) -> tuple:
        return tuple(c for c in self.conditions if not c.passed)


def divided_difference_signs(values, nodes, order: int) -> list:
    """Divided-difference tables f[x_i..x_{i+k}] for k = 0..order.

    For a completely monotone f the k-th order divided differences carry
    sign (-1)**k regardless of the node placement.
    """
    table = [list(map(float, values))]
    for k in range(1, order + 1):
        prev = table[-1]
        row = [
            (prev[i + 1] - prev[i]) / (nodes[i + k] - nodes[i])
            for i in range(len(prev) - 1)
        ]
        table.append(row)
    return table


def _cm_probe(fn, rho: float, s_lo: float, s_hi: float, order: int = 8,
              n_nodes: int = 24, tol: float = 1e-7) -> ConditionResult:
    """Necessary finite-difference test for complete monotonicity of s^-rho q(s)."""
    nodes = np.exp(np.linspace(math.log(s_lo), math.log(s_hi), n_nodes))
    vals = [float(s) ** (-rho) * fn(float(s)) for s in nodes]
    scale = max(abs(v) for v in vals) or 1.0
    table = divided_difference_signs(vals, list(nodes), order)
    worst = 0.0
    witness = None
    for k, row in enumerate(table):
        if not row:
            continue
        want = (-1.0) ** k
        # violations of the sign (-1)^k, relative to the row magnitude
        row_scale = max(max(abs(u) for u in row), scale * 1e-30)
        for i, v in enumerate(row):
            bad = max(0.0, -want * v) / row_scale
            if bad > worst:
                worst = bad
                witness = float(nodes[i])
    return ConditionResult(
        name="complete-monotonicity-probe",
        passed=worst <= tol,
        worst_violation=worst,
        witness=witness,
        note=f"divided differences to order {order} on [{s_lo:g}, {s_hi:g}]",
    )


def check_class_membership(
    p: PeriodicFn, cls: str, rho: float | None = None, tol: float = 1e-9,
    grid_n: int = 1024,
) -> MembershipReport:
    """Check membership conditions on a dense period grid.

    cls is 'P_r' (positive, bounded, inf > 0), 'P_r_rho' (additionally
    x^rho p(x) monotone in the direction given by the sign of rho), or
    'Q_r_rho' (s^-rho p(s) passes the complete-monotonicity probe).
    """
    if cls not in ("P_r", "P_r_rho", "Q_r_rho"):
        raise ValueError(f"unknown class {cls!r}")
    if cls != "P_r" and rho is None:
        raise ValueError(f"class {cls} requires rho")

    conds = []
    z = p.sample_grid(grid_n)
    vals = np.array([p.value_in_period(float(v)) for v in z])
    scale = float(np.max(np.abs(vals))) or 1.0

    finite = np.all(np.isfinite(vals))
    conds.append(
        ConditionResult(
            name="bounded",
            passed=bool(finite),
            worst_violation=0.0 if finite else math.inf,
            witness=None if finite else float(z[np.argmax(~np.isfinite(vals))]),
        )
    )
    vmin = float(np.min(vals))
    i_min = int(np.argmin(vals))
    conds.append(
        ConditionResult(
            name="positive-infimum",
            passed=vmin > tol * scale,
            worst_violation=max(0.0, tol * scale - vmin),
            witness=float(z[i_min]),
            note=f"min {vmin:.6g} on sampled period",
        )
    )

    if cls == "P_r_rho":
        # x^rho p(x) must be nondecreasing for rho >= 0, nonincreasing for
        # rho < 0; checked across [1, r] including the wrap value r^rho p(1).
        h = z**rho * vals
        h = np.append(h, p.r**rho * p.value_in_period(1.0))
        diffs = np.diff(h)
        sign = 1.0 if rho >= 0 else -1.0
        viol = np.maximum(0.0, -sign * diffs)
        worst = float(np.max(viol)) if viol.size else 0.0
        i_bad = int(np.argmax(viol)) if viol.size else 0
        h_scale = float(np.max(np.abs(h))) or 1.0
        conds.append(
            ConditionResult(
                name="monotone-x^rho-p",
                passed=worst <= tol * h_scale * 100,
                worst_violation=worst / h_scale,
                witness=float(z[min(i_bad, len(z) - 1)]),
                note="nondecreasing" if rho >= 0 else "nonincreasing",
            )
        )

    if cls == "Q_r_rho":
        conds.append(
            _cm_probe(lambda s: p.value_in_period(s) if 1 <= s < p.r else p.value(s),
                      rho, 1.0, p.r * 0.9999, tol=max(tol, 1e-7))
        )

    return MembershipReport(cls=cls, rho=rho, conditions=tuple(conds))


@dataclass(frozen=True)
class QClassFn:
    """Transform-side period function: q(r s) = q(s), s^-rho q(s) completely
    monotone in the intended usage; the probe is necessary, not sufficient."""

    rho: float
    q: PeriodicFn

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("QClassFn requires rho >= 0")

    def value(self, s: float) -> float:
        return self.q.value(s)

    __call__ = value

    def membership(self, tol: float = 1e-7) -> MembershipReport:
        return check_class_membership(self.q, "Q_r_rho", self.rho, tol=tol)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometricGrid:
    """Sampling grid: period points z in [1, r) and a lattice exponent range.

    Abscissae are r**n * z (tail side) or r**-n * z (transform side).  When
    |n log r| exceeds LOG_LIMIT the abscissa is handled in the log domain.
    """

    r: float
    z_points: tuple
    n_min: int = 0
    n_max: int = 40

    LOG_LIMIT = 600.0

    def __post_init__(self):
        if not self.r > 1:
            raise ValueError("ratio r must exceed 1")
        if self.n_max < self.n_min:
            raise ValueError("empty lattice range")
        zp = tuple(self.z_points)
        if not zp or any(not (1.0 <= v < self.r) for v in zp):
            raise ValueError("z points must lie in [1, r)")
        if any(b <= a for a, b in zip(zp, zp[1:])):
            raise ValueError("z points must be strictly increasing")

    @classmethod
    def default(
        cls, r: float, fns: tuple = (), n_z: int = 64,
        n_range: tuple[int, int] = (0, 40), neighborhood: float = 1e-9,
    ) -> "GeometricGrid":
        """64 log-equispaced points plus one-sided breakpoint neighborhoods."""
        pts = set(float(r ** (j / n_z)) for j in range(n_z))
        for fn in fns:
            bps = list(fn.breakpoints())
            bps.append(1.0)  # wrap neighborhoods
            for b in bps:
                for cand in (b * (1 - neighborhood), b, b * (1 + neighborhood)):
                    if cand < 1.0:
                        cand *= r
                    if 1.0 <= cand < r:
                        pts.add(float(cand))
        return cls(r=float(r), z_points=tuple(sorted(pts)),
                   n_min=n_range[0], n_max=n_range[1])

    @property
    def n_values(self) -> "np.ndarray":
        return np.arange(self.n_min, self.n_max + 1)

    def log_abscissa(self, n: int, z: float, side: str) -> float:
        sgn = 1.0 if side == "tail" else -1.0
        return sgn * n * math.log(self.r) + math.log(z)

    def abscissa(self, n: int, z: float, side: str = "tail") -> float:
        """r**n * z or r**-n * z; math.inf/0.0 never returned silently."""
        la = self.log_abscissa(n, z, side)
        if abs(la) > self.LOG_LIMIT:
            raise OverflowError("abscissa outside float range; use log routing")
        return math.exp(la)

    def needs_log_domain(self, n: int, z: float, side: str) -> bool:
        return abs(self.log_abscissa(n, z, side)) > self.LOG_LIMIT


# ---------------------------------------------------------------------------
# limit functions and classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StarLimits:
    lam: float
    upper: float  # limsup of f(lambda x)/f(x)
    lower: float  # liminf


def compute_star_limits(f: RegLogPeriodic, lam: float, grid_n: int = 4096) -> StarLimits:
    """f*(lambda) and f_*(lambda): lambda^rho times sup/inf of p(lambda z)/p(z).

    The slowly varying factor drops out of the limit; the sup/inf run over a
    dense period grid with breakpoint neighborhoods on both axes.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    p = f.p
    z = list(p.sample_grid(grid_n))
    # include pre-images of breakpoints so jumps of p(lambda z) are seen
    for b in list(p.breakpoints()) + [1.0]:
        for k in (-1, 0, 1):
            cand = b * p.r**k / lam
            _, cand = reduce_to_period(cand, p.r) if cand > 0 else (0, 1.0)
            for side in (1 - 1e-9, 1.0, 1 + 1e-9):
                v = cand * side
                if 1.0 <= v < p.r:
                    z.append(v)
    hi = -math.inf
    lo = math.inf
    for v in sorted(set(z)):
        ratio = p.value(lam * v) / p.value_in_period(v)
        hi = max(hi, ratio)
        lo = min(lo, ratio)
    scale = lam**f.rho
    return StarLimits(lam=lam, upper=scale * hi, lower=scale * lo)


@dataclass(frozen=True)
class RegularityReport:
    classification: str  # 'regularly-varying' | 'extended-rv' | 'o-rv'
    p_constant: bool
    p_continuous: bool
    p_lipschitz: bool
    lipschitz_estimate: float
    star_continuous_at_1: bool
    note: str = ""


def _lipschitz_estimate(p: PeriodicFn, h: float, grid_n: int = 512) -> float:
    """Sup of |p(z+h)-p(z)|/h over the period, skipping breakpoint straddles."""
    bps = set(p.breakpoints()) | {1.0, p.r}
    worst = 0.0
    z = p.sample_grid(grid_n)
    for v in z:
        v = float(v)
        w = v + h
        if w >= p.r:
            continue
        if any(v < b <= w for b in bps):
            continue
        worst = max(worst, abs(p.value_in_period(w) - p.value_in_period(v)) / h)
    return worst


def classify_regularity(f: RegLogPeriodic, const_tol: float = 1e-12,
                        lip_h: float = 1e-6) -> RegularityReport:
    """Classify into regularly varying / extended / O-regularly varying.

    Regular variation requires the period function to be constant;
    the extended class requires it to be Lipschitz (in particular free of
    jumps, including at the period wrap); otherwise only the O-class holds.
    Non-Lipschitz behavior is flagged when the difference-quotient sup grows
    by more than 10x as the probe step shrinks from lip_h to lip_h / 100.
    """
    p = f.p
    vmin, vmax = p.min_max()
    mid = 0.5 * (vmin + vmax)
    p_const = (vmax - vmin) <= const_tol * max(abs(mid), 1e-300)
    continuous = p.is_continuous()
    lip1 = _lipschitz_estimate(p, lip_h)
    lip2 = _lipschitz_estimate(p, lip_h / 100.0)
    lipschitz = continuous and (lip2 <= 10.0 * max(lip1, 1e-300))
    if p_const:
        cls = "regularly-varying"
    elif lipschitz:
        cls = "extended-rv"
    else:
        cls = "o-rv"
    return RegularityReport(
        classification=cls,
        p_constant=bool(p_const),
        p_continuous=bool(continuous),
        p_lipschitz=bool(lipschitz),
        lipschitz_estimate=lip1,
        star_continuous_at_1=bool(continuous),
        note="star limit continuous at 1 iff the period function is continuous",
    )
