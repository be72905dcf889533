"""Projectivised Jacobi dynamics along a single geodesic.

A covector ``xi = x gamma + y beta`` evolves by ``xdot = -y``, ``ydot = K x``.
We integrate it in the polar chart ``(x, y) = e^rho (cos phi, sin phi)``:

    phidot = K cos^2 phi + sin^2 phi,    rhodot = (K - 1) cos phi sin phi,

which never blows up, so conjugate points are just the times where
``phi = pi/2 mod pi`` (the line ``x = 0``). The Riccati slope is ``r = -y/x``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import ConfigParse, NoConvergence, UnresolvedCrossing, ZeroInitialCovector

RTOL = 1e-12
ATOL = 1e-12
MAX_SAMPLE_STEP = 0.02
TANGENCY_TOL = 1e-8
GAP_TOL = 1e-6


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature along a geodesic: ``constant``, ``sin`` or a piecewise-linear ``table``.

    ``sin`` means ``K(t) = base + amplitude sin(frequency t + phase)``.
    """

    kind: str
    value: float = 0.0
    base: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0
    phase: float = 0.0
    table_t: tuple[float, ...] = ()
    table_k: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "sin", "table"):
            raise ConfigParse(f"unknown curvature profile type {self.kind!r}")
        if self.kind == "table":
            t = np.asarray(self.table_t, dtype=float)
            if t.size < 2 or t.size != len(self.table_k) or np.any(np.diff(t) <= 0):
                raise ConfigParse("table profile needs >= 2 increasing times with matching values")

    @classmethod
    def constant(cls, value: float) -> "CurvatureProfile":
        return cls("constant", value=float(value))

    @classmethod
    def sine(cls, base: float, amplitude: float, frequency: float = 1.0, phase: float = 0.0) -> "CurvatureProfile":
        return cls("sin", base=base, amplitude=amplitude, frequency=frequency, phase=phase)

    @classmethod
    def table(cls, t: Sequence[float], k: Sequence[float]) -> "CurvatureProfile":
        return cls("table", table_t=tuple(float(v) for v in t), table_k=tuple(float(v) for v in k))

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "CurvatureProfile":
        kind = str(data.get("type", data.get("kind", "")))
        try:
            if kind == "constant":
                return cls.constant(float(data["value"]))
            if kind == "sin":
                return cls.sine(
                    float(data.get("base", 0.0)),
                    float(data["amplitude"]),
                    float(data.get("frequency", 1.0)),
                    float(data.get("phase", 0.0)),
                )
            if kind == "table":
                return cls.table(data["t"], data["K"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParse(f"bad {kind} curvature profile: {exc}") from exc
        raise ConfigParse(f"unknown curvature profile type {kind!r}")

    def __call__(self, t):
        if self.kind == "constant":
            return self.value + 0.0 * np.asarray(t, dtype=float)
        if self.kind == "sin":
            return self.base + self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float) + self.phase)
        return np.interp(t, self.table_t, self.table_k)

    def label(self) -> str:
        if self.kind == "constant":
            return f"K={self.value:g}"
        if self.kind == "sin":
            return f"K={self.base:g}+{self.amplitude:g}sin({self.frequency:g}t+{self.phase:g})"
        return f"K=table[{len(self.table_t)}]"


@dataclass(frozen=True, eq=False)
class ConeTrajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    normalized: bool
    profile: CurvatureProfile
    dense: Callable[[float], np.ndarray] = field(repr=False)

    def angle(self, t: float) -> float:
        return float(self.dense(t)[0])

    def point(self, t: float, normalized: bool | None = None) -> tuple[float, float]:
        phi, rho = self.dense(t)
        scale = 1.0 if (self.normalized if normalized is None else normalized) else math.exp(rho)
        return scale * math.cos(phi), scale * math.sin(phi)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for t, x, y in zip(self.t, self.x, self.y):
            w.writerow([f"{t:.12e}", f"{x:.12e}", f"{y:.12e}"])
        return buf.getvalue()


def _rhs(profile: CurvatureProfile):
    def f(t, s):
        K = float(profile(t))
        c, sn = math.cos(s[0]), math.sin(s[0])
        return [K * c * c + sn * sn, (K - 1.0) * c * sn]

    return f


def integrate_projective(
    profile: CurvatureProfile,
    xi0: tuple[float, float],
    t_end: float,
    t_start: float = 0.0,
    normalized: bool = True,
    max_step: float = MAX_SAMPLE_STEP,
) -> ConeTrajectory:
    """Flow ``xi0`` at ``t_start`` to ``t_end`` (either direction) under the Jacobi pair."""
    x0, y0 = (float(v) for v in xi0)
    if x0 == 0.0 and y0 == 0.0:
        raise ZeroInitialCovector("initial covector is zero")
    s0 = [math.atan2(y0, x0), 0.5 * math.log(x0 * x0 + y0 * y0)]
    span = t_end - t_start
    n = max(int(math.ceil(abs(span) / max_step)), 1) + 1
    grid = np.linspace(t_start, t_end, n)
    if span == 0.0:
        phi = np.full(1, s0[0])
        rho = np.full(1, s0[1])
        grid = grid[:1]

        def dense(t):
            return np.array(s0)
    else:
        sol = solve_ivp(
            _rhs(profile), (t_start, t_end), s0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True, t_eval=grid
        )
        if not sol.success:
            raise NoConvergence(f"integrator failed: {sol.message}")
        phi, rho = sol.y
        dense = sol.sol
    scale = 1.0 if normalized else np.exp(rho)
    return ConeTrajectory(grid, scale * np.cos(phi), scale * np.sin(phi), phi, rho, normalized, profile, dense)


@dataclass(frozen=True)
class CrossingReport:
    crossings: tuple[float, ...]
    transversal: tuple[float, ...]  # -y at each crossing, normalised chart
    conjugate_times: tuple[float, ...]
    winding: int
    half_turns: int


def crossing_analysis(traj: ConeTrajectory) -> CrossingReport:
    """Zeros of ``x`` (the cohorizontal line), the sign of ``-y`` there, conjugate times and winding."""
    t, phi = traj.t, traj.phi
    if t.size > 1 and np.max(np.abs(np.diff(phi))) > math.pi / 8:
        raise UnresolvedCrossing("trajectory sampling too coarse to resolve crossings")

    def g(s):
        return math.cos(traj.angle(s))

    times: list[float] = []
    cvals = np.cos(phi)
    for i in range(t.size):
        if cvals[i] == 0.0 or abs(cvals[i]) < 1e-15:
            times.append(float(t[i]))
    for i in range(t.size - 1):
        a, b = cvals[i], cvals[i + 1]
        if a * b < 0 and abs(a) >= 1e-15 and abs(b) >= 1e-15:
            times.append(float(brentq(g, t[i], t[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    times.sort()
    trans = []
    for s in times:
        phi_s, rho_s = traj.dense(s)
        if abs(math.sin(phi_s)) * math.exp(rho_s) < TANGENCY_TOL:
            raise UnresolvedCrossing(f"|y| below {TANGENCY_TOL:g} at t={s:.6g}: tangency suspected")
        trans.append(-math.sin(phi_s))
    t0 = float(t[0])
    conj = tuple(s for s in times if abs(s - t0) > 1e-9)
    turn = phi[-1] - phi[0]
    winding = int(math.floor(abs(turn) / (2 * math.pi)))
    return CrossingReport(tuple(times), tuple(trans), conj, winding, len(conj))


def riccati_consistency(traj: ConeTrajectory, h: float = 5e-4, min_abs_x: float = 0.2) -> float:
    """Max of ``|rdot + r^2 + K|`` with ``r = -y/x`` over samples where ``|x|`` is not small.

    ``rdot`` uses a five-point central difference of the dense solution; stencils
    straddling a breakpoint of a table profile are skipped.
    """
    lo, hi = sorted((float(traj.t[0]), float(traj.t[-1])))
    kinks = np.asarray(traj.profile.table_t, dtype=float)
    worst = 0.0

    def r(s):
        phi = traj.angle(s)
        return -math.tan(phi)

    for s in traj.t:
        if s - 2 * h < lo or s + 2 * h > hi:
            continue
        if kinks.size and np.min(np.abs(kinks - s)) <= 2 * h:
            continue
        if abs(math.cos(traj.angle(s))) < min_abs_x:
            continue
        pts = [s - 2 * h, s - h, s + h, s + 2 * h]
        if min(abs(math.cos(traj.angle(p))) for p in pts) < 0.5 * min_abs_x:
            continue
        rd = (r(pts[0]) - 8 * r(pts[1]) + 8 * r(pts[2]) - r(pts[3])) / (12 * h)
        rv = r(s)
        worst = max(worst, abs(rd + rv * rv + float(traj.profile(s))))
    return worst


@dataclass(frozen=True)
class RiccatiLimits:
    r_u: float
    r_s: float
    angle_u: float
    angle_s: float
    gap: float
    separated: bool
    horizons: tuple[float, ...]
    extrapolated_u: tuple[float, ...]
    extrapolated_s: tuple[float, ...]

    @property
    def verdict(self) -> str:
        return "separated (per-geodesic)" if self.separated else "collapsed (per-geodesic)"

    def record(self) -> dict:
        return {
            "r_u": self.r_u,
            "r_s": self.r_s,
            "gap": self.gap,
            "verdict": self.verdict,
            "horizons": list(self.horizons),
        }


def _limit_angle(profile: CurvatureProfile, horizon: float, forward: bool) -> float:
    """Angle at ``t = 0`` of the line seeded on ``x = 0`` at ``-horizon`` (forward) or ``+horizon``."""
    start = -horizon if forward else horizon
    traj = integrate_projective(profile, (0.0, 1.0), 0.0, t_start=start)
    return traj.angle(0.0)


def _slope(angle: float) -> float:
    c = math.cos(angle)
    if abs(c) < 1e-12:
        return math.inf
    return -math.tan(angle)


def _fold(angle: float) -> float:
    """Line direction modulo pi, in (-pi/2, pi/2]."""
    a = math.fmod(angle, math.pi)
    if a <= -math.pi / 2:
        a += math.pi
    elif a > math.pi / 2:
        a -= math.pi
    return a


def riccati_limits(
    profile: CurvatureProfile, horizons: Sequence[float] = (20.0, 40.0, 80.0), tol: float = GAP_TOL
) -> RiccatiLimits:
    """Hopf limit slopes ``r_u`` (flow forward from ``-T``) and ``r_s`` (backward from ``+T``).

    Slopes at successive doubled horizons are Richardson-extrapolated
    (``2 r(2T) - r(T)``, exact for a ``1/T`` tail) and two successive
    extrapolants must agree to ``tol``.
    """
    horizons = tuple(float(h) for h in horizons)
    if len(horizons) < 3:
        raise ValueError("need at least three horizons")

    def extrapolate(forward: bool) -> tuple[float, tuple[float, ...]]:
        angles = [_fold(_limit_angle(profile, h, forward)) for h in horizons]
        slopes = [_slope(a) for a in angles]
        if all(math.isinf(s) for s in slopes[-2:]):
            return math.inf, tuple(slopes)
        ext = [2 * b - a for a, b in zip(slopes, slopes[1:])]
        if any(not math.isfinite(e) for e in ext[-2:]) or abs(ext[-1] - ext[-2]) > tol:
            raise NoConvergence(
                f"{'unstable' if forward else 'stable'} limit does not settle: "
                f"extrapolants {ext[-2]:.3e} vs {ext[-1]:.3e}"
            )
        return ext[-1], tuple(ext)

    r_u, ext_u = extrapolate(True)
    r_s, ext_s = extrapolate(False)
    ang_u = math.atan2(-r_u, 1.0) if math.isfinite(r_u) else math.pi / 2
    ang_s = math.atan2(-r_s, 1.0) if math.isfinite(r_s) else math.pi / 2
    if math.isfinite(r_u) and math.isfinite(r_s):
        gap = abs(r_u - r_s)
    else:
        d = abs(ang_u - ang_s) % math.pi
        gap = min(d, math.pi - d)
    return RiccatiLimits(r_u, r_s, ang_u, ang_s, gap, gap > tol, horizons, ext_u, ext_s)


def cone_summary(profile: CurvatureProfile, xi0, T: float) -> dict:
    traj = integrate_projective(profile, xi0, T)
    rep = crossing_analysis(traj)
    return {
        "profile": profile.label(),
        "T": T,
        "crossings": list(rep.crossings),
        "conjugate_times": list(rep.conjugate_times),
        "transversal": list(rep.transversal),
        "winding": rep.winding,
        "riccati_consistency": riccati_consistency(traj),
    }


def summary_json(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True)
