"""Fibrewise holomorphic calculus on the transport twistor space.

A :class:`TwistorSeries` is ``h = sum_{k >= m} u_k omega^{k-m}``; its trace on
``|omega| = 1`` is the mode stack ``(u_k)``. Forms are handled through their
coefficients only: a :class:`CoefficientField` is a polynomial
``sum h_{a,b} omega^a omegabar^b`` whose ``(a, b)`` term lives in degree
``m + a - b``, and a :class:`DolbeaultTuple` lists the coefficient fields of a
``(p, q)``-form in a fixed slot order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb
from typing import IO, Iterable

import numpy as np

from .errors import (
    BandLimitExceeded,
    DegreeOutOfRange,
    InvalidBidegree,
    NegativeModesBelowMinusOne,
    NegativeModesPresent,
    PsiVanishes,
    RadiusOutOfRange,
    UnsupportedSurface,
)
from .geometry import SphereSurface, SurfaceBackend, TorusSurface
from .modes import ModeSection, ModeStack, fit_exponent, section_record, synthesize
from .operators import apply_h, apply_v, apply_x, multiply_function

DEFAULT_RADII = tuple(1.0 - 2.0**-j for j in range(2, 11))
EXPONENT_SLACK = 0.5


# ---------------------------------------------------------------------------
# power series and trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwistorSeries:
    """``h = sum_{k >= m} u_k omega^{k - m}``; ``modes`` starts at degree ``m``."""

    m: int
    modes: ModeStack

    def __post_init__(self):
        if self.modes.kmin != self.m:
            raise ValueError("series modes must start at degree m")

    @property
    def backend(self) -> SurfaceBackend:
        return self.modes.backend

    @property
    def kmax(self) -> int:
        return self.modes.kmax

    def term_weight(self, k: int) -> int:
        """V-weight of ``u_k omega^{k-m}``: ``k - (k - m) = m``."""
        return k - (k - self.m)

    def at_radius(self, r: float) -> ModeStack:
        """The stack ``(r^{k-m} u_k)``, i.e. ``h`` restricted to ``omega = r``."""
        powers = float(r) ** np.arange(len(self.modes))
        shape = (-1,) + (1,) * len(self.backend.coef_shape)
        return self.modes.map_data(lambda d: d * powers.reshape(shape))

    def records(self) -> Iterable[dict]:
        for i in range(len(self.modes)):
            yield section_record(self.backend, self.m + i, self.modes.data[i], m=self.m)


def extend(u: ModeStack, m: int | None = None) -> TwistorSeries:
    """Power-series extension of a stack with no modes below ``m`` (default ``min(0, kmin)``)."""
    m = 0 if m is None else int(m)
    if u.kmin < m and np.any(u.data[: m - u.kmin]):
        raise NegativeModesPresent(f"stack has nonzero modes below degree {m}")
    kmax = max(u.kmax, m)
    return TwistorSeries(m, u.padded(m, kmax))


def trace(h: TwistorSeries) -> ModeStack:
    return h.modes


def torus_series(surface: TorusSurface, coefficients, m: int = 0) -> TwistorSeries:
    """``h = sum c_k omega^k e^{i(k+m) theta}``: constant base sections at each degree."""
    c = np.asarray(coefficients, dtype=complex)
    data = np.zeros((c.size, *surface.coef_shape), dtype=complex)
    data[:, 0, 0] = c
    return TwistorSeries(m, ModeStack(surface, m, data))


def planted_mode_growth(p: float, kmax: int) -> np.ndarray:
    """Coefficients ``c_k = <k>^p``, ``0 <= k <= kmax``."""
    k = np.arange(kmax + 1, dtype=float)
    return (1.0 + k * k) ** (p / 2.0)


def planted_radial_growth(q: int, kmax: int) -> np.ndarray:
    """Taylor coefficients of ``(1 - z)^{-q}``: ``binom(k + q - 1, k)``."""
    k = np.arange(kmax + 1, dtype=float)
    if q == 0:
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out
    c = np.ones(kmax + 1)
    for j in range(1, q):
        c = c * (k + j) / j
    return c


def _mode_sups(backend: SurfaceBackend, data: np.ndarray, kmin: int) -> np.ndarray:
    if backend.degree_dependent_grid:
        return np.array([np.abs(backend.to_grid(c, kmin + i)).max() for i, c in enumerate(data)])
    return np.abs(backend.to_grid(data)).reshape(data.shape[0], -1).max(axis=1)


def _eta_strings(n: int) -> list[tuple[str, ...]]:
    words: list[tuple[str, ...]] = [()]
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(n):
        frontier = [w + (c,) for w in frontier for c in ("+", "-", "V")]
        words.extend(frontier)
    return words


def mode_cn_norms(u: ModeStack, order: int = 0) -> np.ndarray:
    """Per-mode ``C^N`` surrogate: sum over strings in ``{eta_+, eta_-, V}`` of length ``<= N`` of sup norms.

    Each string maps a single mode to a single mode, so the sum of sups bounds
    the sup of every word in ``{X, H, V}`` up to a factor ``2^N``.
    """
    backend = u.backend
    total = np.zeros(len(u))
    for word in _eta_strings(order):
        if backend.degree_dependent_grid:
            for i in range(len(u)):
                total[i] += _string_sup(backend, word, u.data[i], u.kmin + i)
            continue
        data, kmin = u.data, u.kmin
        for letter in reversed(word):
            if letter == "+":
                data, kmin = backend.eta_plus_stack(data, kmin), kmin + 1
            elif letter == "-":
                data, kmin = backend.eta_minus_stack(data, kmin), kmin - 1
            else:
                ks = np.arange(kmin, kmin + len(data)).reshape((-1,) + (1,) * len(backend.coef_shape))
                data = 1j * ks * data
        total += _mode_sups(backend, data, kmin)
    return total


def _string_sup(backend: SurfaceBackend, word: tuple[str, ...], c: np.ndarray, k: int) -> float:
    try:
        for letter in reversed(word):
            if letter == "+":
                c, k = backend.eta_plus(c, k), k + 1
            elif letter == "-":
                c, k = backend.eta_minus(c, k), k - 1
            else:
                c = 1j * k * c
        return float(np.abs(backend.to_grid(c, k)).max())
    except DegreeOutOfRange:
        # images past the sphere range vanish identically
        return 0.0


def _words(n: int) -> list[tuple[str, ...]]:
    words: list[tuple[str, ...]] = [()]
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(n):
        frontier = [w + (c,) for w in frontier for c in ("X", "H", "V")]
        words.extend(frontier)
    return words


_FRAME = {"X": apply_x, "H": apply_h, "V": apply_v}


def sm_cn_norm(u: ModeStack, order: int = 0, ntheta: int = 64) -> float:
    """``max`` over words ``w`` in ``{X, H, V}`` of length ``<= N`` of ``sup_SM |w u|`` on the grid."""
    best = 0.0
    for word in _words(order):
        s = u
        for letter in reversed(word):
            s = _FRAME[letter](s)
        best = max(best, float(np.abs(synthesize(s, ntheta)).max()))
    return best


def growth_exponent(ks: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Algebraic growth exponent of a mode sequence, clamped at 0 (bounded means exponent 0)."""
    p, res, rapid = fit_exponent(ks, values)
    if rapid or not np.isfinite(p):
        return 0.0, 0.0 if rapid else float("nan")
    return max(p, 0.0), res


@dataclass(frozen=True)
class GrowthReport:
    trace: ModeStack
    radii: tuple[float, ...]
    radial_sups: tuple[float, ...]
    mode_norms: tuple[float, ...]
    p_modes: float
    p_radial: float
    p_modes_residual: float
    p_radial_residual: float
    order: int

    @property
    def verdict(self) -> bool:
        return (
            self.p_radial <= self.p_modes + 1.0 + EXPONENT_SLACK
            and self.p_modes <= self.p_radial + EXPONENT_SLACK
        )


def trace_and_growth(
    h: TwistorSeries, radii=DEFAULT_RADII, order: int = 0, ntheta: int = 64
) -> GrowthReport:
    """Trace of ``h`` plus the two growth exponents and their equivalence verdict.

    ``p_radial`` is the slope of ``log sup |h(r)|`` against ``-log(1 - r)``,
    ``p_modes`` the slope of ``log ||u_k||_{C^N}`` against ``log <k>`` on
    ``k - m >= 2``. Both are clamped at 0.
    """
    radii = tuple(float(r) for r in radii)
    for r in radii:
        if not 0.0 < r < 1.0:
            raise RadiusOutOfRange(f"radius {r} outside (0, 1)")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise RadiusOutOfRange("radii must be strictly increasing")
    sups = tuple(sm_cn_norm(h.at_radius(r), order, ntheta) for r in radii)
    x = -np.log1p(-np.asarray(radii))
    y = np.log(np.maximum(np.asarray(sups), 1e-300))
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    p_radial = max(float(coef[0]), 0.0)
    rad_res = float(np.sqrt(np.mean((y - A @ coef) ** 2)))
    norms = mode_cn_norms(h.modes, order)
    ks = np.arange(len(norms))  # offsets k - m
    p_modes, mode_res = growth_exponent(ks, norms)
    return GrowthReport(h.modes, radii, sups, tuple(float(v) for v in norms), p_modes, p_radial, mode_res, rad_res, order)


# ---------------------------------------------------------------------------
# holomorphy and products
# ---------------------------------------------------------------------------


def holomorphy_residual(h: TwistorSeries) -> dict[int, float]:
    """``||eta_+ u_{k-2} + eta_- u_k||`` (a section of degree ``k - 1``) for ``m <= k <= kmax + 2``."""
    b, u = h.backend, h.modes
    out = {}
    for k in range(h.m, h.kmax + 3):
        deg = k - 1
        try:
            b.check_degree(deg)
        except DegreeOutOfRange:
            continue
        acc = b.zeros()
        if h.m <= k - 2 <= h.kmax:
            acc = acc + b.eta_plus(u.coef(k - 2), k - 2)
        if h.m <= k <= h.kmax:
            acc = acc + b.eta_minus(u.coef(k), k)
        out[k] = b.norm(acc, deg)
    return out


def is_holomorphic(h: TwistorSeries, tol: float = 1e-8) -> bool:
    return max(holomorphy_residual(h).values()) < tol


def product(h1: TwistorSeries, h2: TwistorSeries, kmax: int | None = None) -> TwistorSeries:
    """Cauchy product in ``omega`` with pointwise products of the base sections."""
    b = h1.backend
    if h2.backend is not b:
        raise ValueError("series live on different backends")
    m = h1.m + h2.m
    top = h1.kmax + h2.kmax
    if isinstance(b, SphereSurface) and top > b.lmax and kmax is None:
        raise BandLimitExceeded(f"product degree {top} exceeds L={b.lmax}")
    bands1 = [b.band_of(c) for c in h1.modes.data]
    bands2 = [b.band_of(c) for c in h2.modes.data]
    lim = b.max_band()
    for axis in range(len(lim)):
        if max(x[axis] for x in bands1) + max(x[axis] for x in bands2) > lim[axis]:
            raise BandLimitExceeded("base product would alias")
    n1, n2 = len(h1.modes), len(h2.modes)
    if b.degree_dependent_grid:
        g1 = np.stack([b.to_grid(c, h1.m + i) for i, c in enumerate(h1.modes.data)])
        g2 = np.stack([b.to_grid(c, h2.m + j) for j, c in enumerate(h2.modes.data)])
    else:
        g1, g2 = b.to_grid(h1.modes.data), b.to_grid(h2.modes.data)
    grid = np.zeros((n1 + n2 - 1, *b.base_shape), dtype=complex)
    for i in range(n1):
        grid[i : i + n2] += g1[i] * g2
    cap = top if kmax is None else min(kmax, top)
    data = np.stack([b.from_grid(grid[i], m + i) for i in range(cap - m + 1)])
    tail = 0.0
    for i in range(cap - m + 1, n1 + n2 - 1):
        tail += float(b.integrate(np.abs(grid[i]) ** 2).real)
    return TwistorSeries(m, ModeStack(b, m, data, tail))


def unit(backend: SurfaceBackend) -> TwistorSeries:
    return TwistorSeries(0, ModeStack.from_sections(backend, {0: ModeSection.constant(backend, 1.0)}))


# ---------------------------------------------------------------------------
# coefficient fields and the Dolbeault complex
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """``sum_{a,b} h_{a,b} omega^a omegabar^b`` at V-weight ``m``; ``data[a, b]`` has degree ``m + a - b``."""

    backend: SurfaceBackend
    m: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 + len(self.backend.coef_shape):
            raise ValueError("coefficient field data must be indexed [a, b, ...]")
        for a in range(data.shape[0]):
            for b in range(data.shape[1]):
                k = self.m + a - b
                try:
                    self.backend.check_degree(k)
                except DegreeOutOfRange:
                    if np.any(data[a, b]):
                        raise
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, backend: SurfaceBackend, m: int, amax: int, bmax: int) -> "CoefficientField":
        return cls(backend, m, np.zeros((amax + 1, bmax + 1, *backend.coef_shape), dtype=complex))

    @classmethod
    def random(
        cls, backend: SurfaceBackend, m: int, amax: int, bmax: int, band: int, rng: np.random.Generator
    ) -> "CoefficientField":
        data = np.zeros((amax + 1, bmax + 1, *backend.coef_shape), dtype=complex)
        for a in range(amax + 1):
            for b in range(bmax + 1):
                k = m + a - b
                try:
                    backend.check_degree(k)
                except DegreeOutOfRange:
                    continue
                data[a, b] = backend.random_coefficients(k, band, rng)
        return cls(backend, m, data)

    def degree(self, a: int, b: int) -> int:
        return self.m + a - b

    def term(self, a: int, b: int) -> ModeSection:
        return ModeSection(self.backend, self.degree(a, b), self.data[a, b])

    def _aligned(self, other: "CoefficientField"):
        if other.backend is not self.backend or other.m != self.m:
            raise ValueError("fields differ in backend or weight")
        A = max(self.data.shape[0], other.data.shape[0])
        B = max(self.data.shape[1], other.data.shape[1])
        return self.padded(A - 1, B - 1).data, other.padded(A - 1, B - 1).data

    def padded(self, amax: int, bmax: int) -> "CoefficientField":
        out = np.zeros((amax + 1, bmax + 1, *self.backend.coef_shape), dtype=complex)
        out[: self.data.shape[0], : self.data.shape[1]] = self.data
        return CoefficientField(self.backend, self.m, out)

    def __add__(self, other: "CoefficientField") -> "CoefficientField":
        x, y = self._aligned(other)
        return CoefficientField(self.backend, self.m, x + y)

    def __sub__(self, other: "CoefficientField") -> "CoefficientField":
        x, y = self._aligned(other)
        return CoefficientField(self.backend, self.m, x - y)

    def __neg__(self) -> "CoefficientField":
        return CoefficientField(self.backend, self.m, -self.data)

    def norm(self) -> float:
        tot = 0.0
        for a in range(self.data.shape[0]):
            for b in range(self.data.shape[1]):
                k = self.degree(a, b)
                if np.any(self.data[a, b]):
                    tot += self.backend.norm(self.data[a, b], k) ** 2
        return float(np.sqrt(tot))

    def records(self, **header) -> Iterable[dict]:
        for a in range(self.data.shape[0]):
            for b in range(self.data.shape[1]):
                yield section_record(self.backend, self.degree(a, b), self.data[a, b], m=self.m, a=a, b=b, **header)


def apply_p(f: CoefficientField) -> CoefficientField:
    """``(omega^2 eta_+ + eta_-) f``: weight ``m -> m - 1``."""
    backend = f.backend
    A, B = f.data.shape[:2]
    out = np.zeros((A + 2, B, *backend.coef_shape), dtype=complex)
    for a in range(A):
        for b in range(B):
            c = f.data[a, b]
            if not np.any(c):
                continue
            k = f.degree(a, b)
            out[a + 2, b] += backend.eta_plus(c, k)
            out[a, b] += backend.eta_minus(c, k)
    return CoefficientField(backend, f.m - 1, out)


def dbar_omega(f: CoefficientField) -> CoefficientField:
    """``d/d omegabar``: ``(a, b) -> (a, b - 1)`` with factor ``b``; weight ``m -> m - 1``."""
    A, B = f.data.shape[:2]
    out = np.zeros((A, max(B - 1, 1), *f.backend.coef_shape), dtype=complex)
    for b in range(1, B):
        out[:, b - 1] = b * f.data[:, b]
    return CoefficientField(f.backend, f.m - 1, out)


def dbar_omega_solve(f: CoefficientField) -> CoefficientField:
    """Termwise antiderivative ``omegabar^b -> omegabar^{b+1} / (b + 1)``; weight ``m - 1 -> m``."""
    A, B = f.data.shape[:2]
    out = np.zeros((A, B + 1, *f.backend.coef_shape), dtype=complex)
    for b in range(B):
        out[:, b + 1] = f.data[:, b] / (b + 1)
    return CoefficientField(f.backend, f.m + 1, out)


def series_field(h: TwistorSeries) -> CoefficientField:
    """A twistor series as a coefficient field (pure powers of ``omega``)."""
    data = np.asarray(h.modes.data)[:, None]
    return CoefficientField(h.backend, h.m, data)


@dataclass(frozen=True, eq=False)
class DolbeaultTuple:
    p: int
    q: int
    entries: tuple[CoefficientField, ...]

    def __post_init__(self):
        if self.p not in (0, 1, 2) or self.q not in (0, 1, 2):
            raise InvalidBidegree(f"bidegree ({self.p}, {self.q}) outside {{0,1,2}}^2")
        need = comb(2, self.p) * comb(2, self.q)
        if len(self.entries) != need:
            raise ValueError(f"({self.p},{self.q}) needs {need} entries, got {len(self.entries)}")
        for e in self.entries:
            if e.m != self.p - self.q:
                raise ValueError(f"entry weight {e.m} != {self.p - self.q}")
        object.__setattr__(self, "entries", tuple(self.entries))

    @classmethod
    def random(
        cls, backend: SurfaceBackend, p: int, q: int, amax: int, bmax: int, band: int, rng: np.random.Generator
    ) -> "DolbeaultTuple":
        n = comb(2, p) * comb(2, q)
        return cls(p, q, tuple(CoefficientField.random(backend, p - q, amax, bmax, band, rng) for _ in range(n)))

    def norm(self) -> float:
        return float(np.sqrt(sum(e.norm() ** 2 for e in self.entries)))

    def records(self) -> Iterable[dict]:
        for slot, e in enumerate(self.entries):
            yield from e.records(p=self.p, q=self.q, slot=slot)


def dolbeault_D(t: DolbeaultTuple) -> DolbeaultTuple:
    """``D^{p,q}``: coefficient form of the Dolbeault operator, ``(p, q) -> (p, q + 1)``."""
    P, Db = apply_p, dbar_omega
    h = t.entries
    if t.q == 2:
        raise InvalidBidegree("D is not defined on (p, 2)")
    if t.p in (0, 2):
        if t.q == 0:
            out = (P(h[0]), Db(h[0]))
        else:
            out = (-Db(h[0]) + P(h[1]),)
    elif t.q == 0:
        out = (-P(h[0]), -Db(h[0]), -P(h[1]), -Db(h[1]))
    else:
        out = (Db(h[0]) - P(h[1]), Db(h[2]) - P(h[3]))
    return DolbeaultTuple(t.p, t.q + 1, out)


def write_records(records: Iterable[dict], fp: IO[str]) -> None:
    for rec in records:
        fp.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# line-bundle obstructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Obstruction:
    period: complex
    integral: complex
    reduced_period: complex | None  # modulo pi(Z + iZ); unit lattice only
    tol: float = 1e-10

    @property
    def period_vanishes(self) -> bool | None:
        if self.reduced_period is None:
            return None
        return abs(self.reduced_period) < self.tol

    @property
    def integral_vanishes(self) -> bool:
        return abs(self.integral) < self.tol

    @property
    def flagged(self) -> bool:
        return not self.integral_vanishes or self.period_vanishes is False


def _is_unit_lattice(surface: TorusSurface) -> bool:
    return bool(np.allclose(surface.lattice, np.eye(2), atol=1e-14))


def bundle_obstruction(a: ModeStack) -> Obstruction:
    """Period of ``a_{-1}`` (its torus mean) and ``int_M a_0 dVol`` on a flat torus.

    Gauge changes ``psi = exp(2 pi i n.x)`` shift the period by ``pi(i n_1 - n_2)``
    on the unit lattice, so there the period is also reported modulo ``pi(Z + iZ)``.
    """
    surface = a.backend
    if not isinstance(surface, TorusSurface) or not surface.is_flat:
        raise UnsupportedSurface("bundle obstructions are implemented on flat tori")
    if a.kmin < -1 and np.any(a.data[: -1 - a.kmin]):
        raise NegativeModesBelowMinusOne("a has nonzero modes below degree -1")
    period = complex(a.coef(-1)[0, 0])
    integral = complex(surface.integrate(surface.to_grid(a.coef(0))))
    reduced = None
    if _is_unit_lattice(surface):
        z = period / np.pi
        reduced = complex(np.pi * (z - complex(np.round(z.real), np.round(z.imag))))
    return Obstruction(period, integral, reduced)


def gauge_term(psi: ModeSection) -> ModeStack:
    """``psi^{-1} X psi`` for a nonvanishing base function ``psi``."""
    backend = psi.backend
    if psi.k != 0:
        raise ValueError("psi must be a function on M (degree 0)")
    vals = backend.to_grid(psi.coefficients, 0)
    if np.abs(vals).min() < 1e-12:
        raise PsiVanishes("psi vanishes on the grid")
    xpsi = apply_x(ModeStack.from_sections(backend, {0: psi}))
    return multiply_function(1.0 / vals, xpsi)


def gauge_residual(a: ModeStack, psi: ModeSection, w: ModeStack | None = None) -> float:
    """``||X w - a - psi^{-1} X psi||`` in L2 over the stored band."""
    backend = a.backend
    xw = apply_x(w) if w is not None else ModeStack.zeros(backend, 0, 0)
    return float((xw - a - gauge_term(psi)).norm())
