"""Transport equations ``(X + phi) u = f`` in vertical Fourier modes.

Mode by mode the equation reads ``eta_+ u_{k-1} + phi u_k + eta_- u_{k+1} = f_k``.
On the round sphere ``eta_-`` is injective on positive degrees and ``eta_+`` on
negative ones, so ``u`` is pinned down by ``(u_0, u_1, f)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import BandLimitExceeded, GrowthDetected, SolveFailed, UnsupportedSurface
from .geometry import SphereSurface, SurfaceBackend, TorusSurface
from .modes import ModeSection, ModeStack, mode_norms
from .operators import (
    OpTag,
    apply_x,
    kernel_dimension_formula,
    kernel_report,
    multiply_phi,
    solve_elliptic,
)

GROWTH_FACTOR = 1e6


@dataclass(frozen=True, eq=False)
class TransportProblem:
    surface: SurfaceBackend
    phi: ModeSection
    f: ModeStack
    band: int

    def __post_init__(self):
        if self.phi.k != 0:
            raise ValueError("phi must have vertical degree 0")
        if self.phi.backend is not self.surface or self.f.backend is not self.surface:
            raise ValueError("phi, f and surface must share a backend")
        if max(abs(self.f.kmin), abs(self.f.kmax)) > self.band:
            raise BandLimitExceeded(f"f has degrees beyond the band {self.band}")

    @classmethod
    def with_constant(cls, surface: SurfaceBackend, phi: complex, f: ModeStack, band: int) -> "TransportProblem":
        return cls(surface, ModeSection.constant(surface, phi), f, band)


def phi_section(surface: SurfaceBackend, phi: complex | ModeSection) -> ModeSection:
    return phi if isinstance(phi, ModeSection) else ModeSection.constant(surface, phi)


def _check_headroom(u: ModeStack) -> None:
    backend = u.backend
    if isinstance(backend, SphereSurface):
        live = u.trimmed()
        top = max(abs(live.kmin), abs(live.kmax))
        if live.data.any() and top + 1 > backend.lmax:
            raise BandLimitExceeded(f"degree {top} leaves no headroom below L={backend.lmax}")


def apply_transport(phi: ModeSection, u: ModeStack) -> ModeStack:
    """``(X + phi) u`` as a mode stack."""
    _check_headroom(u)
    return apply_x(u) + multiply_phi(phi, u)


def transport_apply(problem: TransportProblem, u: ModeStack) -> ModeStack:
    return apply_transport(problem.phi, u)


@dataclass(frozen=True)
class Reconstruction:
    stack: ModeStack
    residual: float  # ||(X + phi) u - f|| over the imposed degrees, relative to ||f|| (absolute if f = 0)
    per_k: tuple[tuple[int, float, float], ...] = field(default=())  # (k, ||u_k||, equation residual)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "norm_u_k", "residual_k"])
        for k, nu, r in self.per_k:
            w.writerow([k, f"{nu:.12e}", f"{r:.6e}"])
        return buf.getvalue()


def _solve(tag: OpTag, k: int, rhs: np.ndarray, backend: SurfaceBackend) -> np.ndarray:
    target = k + (1 if tag is OpTag.ETA_PLUS else -1)
    if not np.any(rhs):
        return backend.zeros()
    sol = solve_elliptic(tag, k, ModeSection(backend, target, np.where(backend.valid_mask(target), rhs, 0.0)))
    if not sol.injective:
        raise SolveFailed(f"{tag.value} is not injective on degree {k}")
    return sol.solution.coefficients


def flaminio_reconstruct(
    problem: TransportProblem, u0: ModeSection, u1: ModeSection, kmax: int
) -> Reconstruction:
    """Rebuild ``u`` on ``|k| <= kmax`` from ``(u_0, u_1)`` and ``f = (X + phi) u``.

    Upward: ``u_{k+1} = eta_-^{-1}(f_k - eta_+ u_{k-1} - phi u_k)`` for ``k >= 1``.
    Seed: ``u_{-1} = L(f_0 - phi u_0 - eta_- u_1)`` with ``L`` the left inverse of
    ``eta_+`` on ``Omega_{-1}``. Downward: ``u_{k-1} = eta_+^{-1}(f_k - phi u_k -
    eta_- u_{k+1})`` for ``k <= -1``. The two passes only share the seed pair.
    """
    backend = problem.surface
    if not isinstance(backend, SphereSurface):
        raise UnsupportedSurface("reconstruction needs the injectivity pattern of the round sphere")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if kmax > backend.lmax:
        raise BandLimitExceeded(f"kmax={kmax} exceeds sphere degree {backend.lmax}")
    f, phi = problem.f, problem.phi.coefficients

    def mult(c, k):
        return backend.multiply(phi, 0, c, k)

    u = {0: u0.coefficients, 1: u1.coefficients}
    scale = max(u0.norm(), u1.norm())
    if scale == 0.0:
        scale = f.norm()

    def guard(k):
        nrm = backend.norm(u[k], k)
        if scale > 0 and nrm > GROWTH_FACTOR * scale:
            raise GrowthDetected(f"||u_{k}|| = {nrm:.3e} exceeds {GROWTH_FACTOR:g} x {scale:.3e}")

    for k in range(1, kmax):
        rhs = f.coef(k) - backend.eta_plus(u[k - 1], k - 1) - mult(u[k], k)
        u[k + 1] = _solve(OpTag.ETA_MINUS, k + 1, rhs, backend)
        guard(k + 1)
    rhs = f.coef(0) - mult(u[0], 0) - backend.eta_minus(u[1], 1)
    u[-1] = _solve(OpTag.ETA_PLUS, -1, rhs, backend)
    guard(-1)
    for k in range(-1, -kmax, -1):
        rhs = f.coef(k) - mult(u[k], k) - backend.eta_minus(u[k + 1], k + 1)
        u[k - 1] = _solve(OpTag.ETA_PLUS, k - 1, rhs, backend)
        guard(k - 1)

    stack = ModeStack.from_sections(backend, u)
    image = apply_transport(problem.phi, stack)
    per_k = []
    total = 0.0
    for k in range(-kmax + 1, kmax):
        r = backend.norm(image.coef(k) - f.coef(k), k)
        total += r * r
        per_k.append((k, backend.norm(u[k], k), r))
    for k in (-kmax, kmax):
        per_k.append((k, backend.norm(u[k], k), float("nan")))
    per_k.sort()
    fn = f.norm()
    res = np.sqrt(total) / fn if fn > 0 else np.sqrt(total)
    return Reconstruction(stack, float(res), tuple(per_k))


# ---------------------------------------------------------------------------
# stability sampling
# ---------------------------------------------------------------------------


def stability_ratio(problem: TransportProblem, u: ModeStack, s: float = 0.0) -> float:
    """``||u||_{H^s} / (||(X + phi) u||_{H^s} + ||u_0||_{H^{s+1}} + ||u_1||_{H^{s+1}})``."""
    num = mode_norms(u, s).total_hs
    if num == 0.0:
        raise ZeroDivisionError("stability ratio of the zero stack")
    backend = u.backend
    den = mode_norms(apply_transport(problem.phi, u), s).total_hs
    den += backend.sobolev_norm(u.coef(0), 0, s + 1) + backend.sobolev_norm(u.coef(1), 1, s + 1)
    return float(num / den)


def zoll_ratio(phi: ModeSection, u: ModeStack, s: float = 0.0) -> float:
    """``||u||_{H^s} / ||(X + phi) u||_{H^s}`` without the ``(u_0, u_1)`` terms."""
    num = mode_norms(u, s).total_hs
    if num == 0.0:
        raise ZeroDivisionError("stability ratio of the zero stack")
    return float(num / mode_norms(apply_transport(phi, u), s).total_hs)


@dataclass(frozen=True)
class StabilityTable:
    s: float
    ratios: tuple[float, ...]
    zoll_ratios: tuple[float, ...]
    zoll_phi: complex

    def running_max(self, n: int | None = None) -> float:
        vals = self.ratios if n is None else self.ratios[:n]
        return float(max(vals))

    def zoll_running_max(self, n: int | None = None) -> float:
        vals = self.zoll_ratios if n is None else self.zoll_ratios[:n]
        return float(max(vals))

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "ratio", "running_max", "zoll_ratio", "zoll_running_max"])
        rmax = zmax = 0.0
        for i, (r, z) in enumerate(zip(self.ratios, self.zoll_ratios)):
            rmax, zmax = max(rmax, r), max(zmax, z)
            w.writerow([i, f"{r:.12e}", f"{rmax:.12e}", f"{z:.12e}", f"{zmax:.12e}"])
        return buf.getvalue()


def stability_batch(
    surface: SurfaceBackend,
    samples: int = 200,
    s: float = 0.0,
    seed: int = 0,
    kspan: int = 4,
    band: int = 8,
    phi: complex | ModeSection = 0.0,
    zoll_phi: complex = 0.5j,
) -> StabilityTable:
    """Empirical stability ratios over seeded standard complex normal stacks.

    Each sample is i.i.d. on degrees ``|k| <= kspan`` and sphere band ``l <= band``.
    The Zoll column uses ``phi = zoll_phi`` and drops the ``(u_0, u_1)`` terms.
    """
    if not isinstance(surface, SphereSurface):
        raise UnsupportedSurface("stability sampling is defined on the round sphere")
    rng = np.random.default_rng(seed)
    phi_s = phi_section(surface, phi)
    zphi = phi_section(surface, zoll_phi)
    problem = TransportProblem(surface, phi_s, ModeStack.zeros(surface, 0, 0), kspan + 1)
    ratios, zolls = [], []
    for _ in range(samples):
        u = ModeStack.random(surface, -kspan, kspan, band, rng)
        ratios.append(stability_ratio(problem, u, s))
        zolls.append(zoll_ratio(zphi, u, s))
    return StabilityTable(float(s), tuple(ratios), tuple(zolls), complex(zoll_phi))


# ---------------------------------------------------------------------------
# first integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusInvariant:
    stack: ModeStack
    x_residual: float


@dataclass(frozen=True)
class CertificateStep:
    k: int
    equation: str
    kernel_dim_numeric: int
    kernel_dim_formula: int
    conclusion: str


@dataclass(frozen=True)
class SphereCertificate:
    steps: tuple[CertificateStep, ...]
    constant_only: bool
    algebra_dimension: int

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "equation", "dim_numeric", "dim_formula", "conclusion"])
        for st in self.steps:
            w.writerow([st.k, st.equation, st.kernel_dim_numeric, st.kernel_dim_formula, st.conclusion])
        return buf.getvalue()


def torus_invariant(surface: TorusSurface, coefficients) -> TorusInvariant:
    """Fibrewise holomorphic first integral ``u_k = c_k e^{ik theta}`` on a flat torus."""
    c = np.asarray(coefficients, dtype=complex)
    if c.size == 0:
        raise ValueError("need at least one coefficient")
    data = np.zeros((c.size, *surface.coef_shape), dtype=complex)
    data[:, 0, 0] = c
    stack = ModeStack(surface, 0, data)
    xu = apply_x(stack)
    return TorusInvariant(stack, xu.norm())


def sphere_certificate(surface: SphereSurface, kmax: int | None = None) -> SphereCertificate:
    """Show that ``Xu = 0`` with ``u`` fibrewise holomorphic forces ``u`` constant.

    ``eta_- u_0 = 0`` leaves constants, ``eta_- u_1 = 0`` kills ``u_1`` and then
    ``eta_- u_{k+2} = -eta_+ u_k = 0`` kills every higher mode in turn.
    """
    kmax = surface.lmax if kmax is None else min(kmax, surface.lmax)
    steps = []
    ok = True
    rep = kernel_report(surface, OpTag.ETA_MINUS, 0)
    ok &= rep.dim_numeric == 1
    steps.append(CertificateStep(0, "eta_- u_0 = 0", rep.dim_numeric, rep.dim_formula, "u_0 constant"))
    for k in range(1, kmax + 1):
        rep = kernel_report(surface, OpTag.ETA_MINUS, k)
        ok &= rep.dim_numeric == 0 and rep.dim_formula == kernel_dimension_formula(0, OpTag.ETA_MINUS, k)
        eq = "eta_- u_1 = 0" if k == 1 else f"eta_- u_{k} = -eta_+ u_{k - 2} = 0"
        steps.append(CertificateStep(k, eq, rep.dim_numeric, rep.dim_formula, f"u_{k} = 0"))
    return SphereCertificate(tuple(steps), bool(ok), 1 if ok else -1)


def invariant_catalog(surface: SurfaceBackend, spec=None):
    """Torus: the invariant stack for coefficients ``spec``. Sphere: the triviality certificate."""
    if isinstance(surface, TorusSurface) and surface.is_flat:
        return torus_invariant(surface, (1.0,) if spec is None else spec)
    if isinstance(surface, SphereSurface):
        return sphere_certificate(surface)
    raise UnsupportedSurface(f"no first-integral catalogue for {surface!r}")
