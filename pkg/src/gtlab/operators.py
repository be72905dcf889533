"""Geometric operators X, H, V, eta_+/- and multiplication on mode stacks.

``eta_+`` raises the vertical degree by one and ``eta_-`` lowers it; the frame is
recovered as ``X = eta_+ + eta_-`` and ``H = i(eta_+ - eta_-)``.
"""

from __future__ import annotations

import enum
import io
import csv
import weakref
from dataclasses import dataclass, field

import numpy as np

from .errors import BandLimitExceeded, DegreeOutOfRange, RankDeficient, TruncationTooTight
from .geometry import SphereSurface, SurfaceBackend, TorusSurface
from .modes import ModeSection, ModeStack

KERNEL_RTOL = 1e-8
GAP_FACTOR = 10.0


class OpTag(str, enum.Enum):
    X = "X"
    H = "H"
    V = "V"
    ETA_PLUS = "EtaPlus"
    ETA_MINUS = "EtaMinus"
    MULT_PHI = "MultByPhi"


_SHIFT = {OpTag.ETA_PLUS: 1, OpTag.ETA_MINUS: -1}


@dataclass(frozen=True, eq=False)
class GeometricOperator:
    tag: OpTag
    backend: SurfaceBackend
    phi: ModeSection | None = None

    def __post_init__(self):
        object.__setattr__(self, "tag", OpTag(self.tag))
        if self.tag is OpTag.MULT_PHI:
            if self.phi is None or self.phi.k != 0:
                raise ValueError("MultByPhi needs a degree-0 section phi")
            if self.phi.backend is not self.backend:
                raise ValueError("phi lives on a different backend")

    def __call__(self, stack: ModeStack) -> ModeStack:
        return apply_operator(self, stack)

    @classmethod
    def mult(cls, phi: ModeSection) -> "GeometricOperator":
        return cls(OpTag.MULT_PHI, phi.backend, phi)


def _check_backend(op: GeometricOperator, stack: ModeStack) -> None:
    if stack.backend is not op.backend:
        raise ValueError("operator and stack use different backends")


def _shifted(backend: SurfaceBackend, data: np.ndarray, kmin: int, shift: int) -> ModeStack:
    """Wrap ``data`` (already computed at degrees ``kmin + i + shift``) as a stack.

    Sections whose target degree falls outside the backend range must be zero;
    they are dropped, anything else is an error.
    """
    ks = np.arange(kmin, kmin + data.shape[0]) + shift
    keep = np.ones(len(ks), dtype=bool)
    for i, k in enumerate(ks):
        try:
            backend.check_degree(int(k))
        except DegreeOutOfRange:
            if np.any(np.abs(data[i]) > 0):
                raise
            keep[i] = False
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return ModeStack.zeros(backend, 0, 0)
    # kept degrees are contiguous because the backend range is an interval
    return ModeStack(backend, int(ks[idx[0]]), data[idx[0] : idx[-1] + 1])


def _eta_data(backend: SurfaceBackend, stack: ModeStack, sign: int) -> np.ndarray:
    if sign > 0:
        return backend.eta_plus_stack(stack.data, stack.kmin)
    return backend.eta_minus_stack(stack.data, stack.kmin)


def eta_plus(stack: ModeStack) -> ModeStack:
    return _shifted(stack.backend, _eta_data(stack.backend, stack, +1), stack.kmin, 1)


def eta_minus(stack: ModeStack) -> ModeStack:
    return _shifted(stack.backend, _eta_data(stack.backend, stack, -1), stack.kmin, -1)


def apply_v(stack: ModeStack) -> ModeStack:
    ks = np.arange(stack.kmin, stack.kmax + 1).reshape((-1,) + (1,) * len(stack.backend.coef_shape))
    return stack.map_data(lambda d: 1j * ks * d)


def multiply_phi(phi: ModeSection, stack: ModeStack) -> ModeStack:
    backend = stack.backend
    data = np.stack([backend.multiply(phi.coefficients, 0, stack.data[i], stack.kmin + i) for i in range(len(stack))])
    return ModeStack(backend, stack.kmin, data, stack.discarded_tail)


def multiply_function(values: np.ndarray, stack: ModeStack) -> ModeStack:
    """Multiply every mode by a real function given on the base grid."""
    backend = stack.backend
    data = np.stack([backend.multiply_grid(stack.data[i], stack.kmin + i, values) for i in range(len(stack))])
    return ModeStack(backend, stack.kmin, data, stack.discarded_tail)


def apply_x(stack: ModeStack) -> ModeStack:
    return eta_plus(stack) + eta_minus(stack)


def apply_h(stack: ModeStack) -> ModeStack:
    return (eta_plus(stack) - eta_minus(stack)) * 1j


def apply_operator(op: GeometricOperator, stack: ModeStack) -> ModeStack:
    """Apply ``op`` to every mode of ``stack``; output degrees shift with the operator."""
    _check_backend(op, stack)
    if op.tag is OpTag.ETA_PLUS:
        return eta_plus(stack)
    if op.tag is OpTag.ETA_MINUS:
        return eta_minus(stack)
    if op.tag is OpTag.X:
        return apply_x(stack)
    if op.tag is OpTag.H:
        return apply_h(stack)
    if op.tag is OpTag.V:
        return apply_v(stack)
    return multiply_phi(op.phi, stack)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------


def default_band(backend: SurfaceBackend) -> int:
    """Band used for random test data: a quarter of the grid on tori, all of it on spheres."""
    if isinstance(backend, TorusSurface):
        n = min(backend.resolution)
        return n // 8 if not backend.is_flat else n // 4
    return backend.max_band()[0]


def random_stack(backend: SurfaceBackend, rng: np.random.Generator, kspan: int = 3, band: int | None = None) -> ModeStack:
    band = default_band(backend) if band is None else band
    return ModeStack.random(backend, -kspan, kspan, band, rng)


@dataclass(frozen=True)
class CommutatorReport:
    backend: str
    trials: int
    residuals: dict[str, float] = field(default_factory=dict)

    def max_residual(self) -> float:
        return max(self.residuals.values())

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_residual() < tol


COMMUTATOR_NAMES = (
    "[V,X]-H",
    "[X,H]-KV",
    "[H,V]-X",
    "[-iV,eta+]-eta+",
    "[-iV,eta-]+eta-",
    "[eta+,eta-]-iKV/2",
)


def commutator_residuals(u: ModeStack) -> dict[str, float]:
    """Relative residuals ``||lhs - rhs|| / ||u||`` of the six structure identities."""
    K = u.backend.curvature_grid()
    X, H, V = apply_x, apply_h, apply_v
    ep, em = eta_plus, eta_minus

    def miv(s: ModeStack) -> ModeStack:
        return V(s) * -1j

    def comm(a, b, s):
        return a(b(s)) - b(a(s))

    kv = multiply_function(K, V(u))
    scale = u.norm()
    out = {
        COMMUTATOR_NAMES[0]: comm(V, X, u) - H(u),
        COMMUTATOR_NAMES[1]: comm(X, H, u) - kv,
        COMMUTATOR_NAMES[2]: comm(H, V, u) - X(u),
        COMMUTATOR_NAMES[3]: comm(miv, ep, u) - ep(u),
        COMMUTATOR_NAMES[4]: comm(miv, em, u) + em(u),
        COMMUTATOR_NAMES[5]: comm(ep, em, u) - kv * 0.5j,
    }
    return {name: s.norm() / scale for name, s in out.items()}


def commutator_check(surface: SurfaceBackend, trials: int = 100, seed: int = 0, kspan: int = 3) -> CommutatorReport:
    """Worst relative residual of each structure identity over seeded random stacks.

    On spheres the stack is kept two degrees inside the band so no composition
    leaves the representable range.
    """
    rng = np.random.default_rng(seed)
    if isinstance(surface, SphereSurface):
        kspan = min(kspan, surface.lmax - 2)
    worst = dict.fromkeys(COMMUTATOR_NAMES, 0.0)
    for _ in range(trials):
        res = commutator_residuals(random_stack(surface, rng, kspan))
        for name, val in res.items():
            worst[name] = max(worst[name], val)
    return CommutatorReport(repr(surface), trials, worst)


@dataclass(frozen=True)
class PestovResult:
    k: int
    lhs: float
    rhs: float
    residual: float


def _headroom(u: ModeSection) -> None:
    backend = u.backend
    if isinstance(backend, SphereSurface):
        if abs(u.k) + 1 > backend.lmax:
            raise BandLimitExceeded(f"degree {u.k} has no headroom at L={backend.lmax}")
    else:
        band, top = backend.band_of(u.coefficients), backend.max_band()
        if any(b >= t for b, t in zip(band, top)):
            raise BandLimitExceeded(f"section band {band} leaves no headroom below {top}")


def pestov_check(u: ModeSection) -> PestovResult:
    """Both sides of ``||eta_+ u||^2 = ||eta_- u||^2 - (k/2)<Ku, u>``."""
    _headroom(u)
    b, k, c = u.backend, u.k, u.coefficients
    lhs = b.norm(b.eta_plus(c, k), k + 1) ** 2
    ku = b.integrate(b.curvature_grid() * np.abs(b.to_grid(c, k)) ** 2).real
    em = b.norm(b.eta_minus(c, k), k - 1) ** 2
    rhs = em - 0.5 * k * ku
    # relative to the size of the individual terms, which may cancel
    res = abs(lhs - rhs) / (abs(lhs) + em + abs(0.5 * k * ku) + 1e-300)
    return PestovResult(k, float(lhs), float(rhs), float(res))


def adjoint_residual(backend: SurfaceBackend, k: int, rng: np.random.Generator, band: int | None = None) -> float:
    """Relative defect of ``<eta_+ u, v> = -<u, eta_- v>`` for random ``u in Omega_k``, ``v in Omega_{k+1}``."""
    band = default_band(backend) if band is None else band
    u = backend.random_coefficients(k, band, rng)
    v = backend.random_coefficients(k + 1, band, rng)
    a = backend.inner(backend.eta_plus(u, k), v, k + 1)
    c = -backend.inner(u, backend.eta_minus(v, k + 1), k)
    return abs(a - c) / max(abs(a), abs(c), 1e-300)


def szego_commutator_check(stack: ModeStack) -> float:
    """Residual of ``[S, X] f - (eta_+ f_{-1} - eta_- f_0)``, relative to ``||f||``."""
    from .modes import szego

    backend = stack.backend
    lhs = szego(apply_x(stack)) - apply_x(szego(stack))
    fm1, f0 = stack.coef(-1), stack.coef(0)
    rhs = ModeStack.from_sections(
        backend,
        {-1: -backend.eta_minus(f0, 0), 0: backend.eta_plus(fm1, -1)},
    )
    scale = max(stack.norm(), 1e-300)
    return (lhs - rhs).norm() / scale


# ---------------------------------------------------------------------------
# kernels and elliptic solves
# ---------------------------------------------------------------------------


def kernel_dimension_formula(genus: int, tag: OpTag | str, k: int) -> int:
    """Closed-form ``dim ker eta_+/-`` on ``Omega_k`` for a surface of the given genus."""
    tag = OpTag(tag)
    if tag not in _SHIFT:
        raise ValueError("kernel formulas exist only for EtaPlus / EtaMinus")
    if genus < 0:
        raise ValueError("genus must be >= 0")
    # eta_- on Omega_k mirrors eta_+ on Omega_{-k}
    if tag is OpTag.ETA_MINUS:
        k = -k
    if genus == 0:
        return max(2 * k + 1, 0)
    if genus == 1:
        return 1
    if k <= -2:
        return -(2 * k + 1) * (genus - 1)
    if k == -1:
        return genus
    if k == 0:
        return 1
    return 0


_FACTOR_CACHE: "weakref.WeakKeyDictionary[SurfaceBackend, dict]" = weakref.WeakKeyDictionary()


@dataclass(frozen=True, eq=False)
class _Factorization:
    tag: OpTag
    k: int
    domain: np.ndarray  # boolean mask of free coefficients in Omega_k
    target: np.ndarray  # boolean mask of coefficients in the image degree
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray

    @property
    def threshold(self) -> float:
        return KERNEL_RTOL * (self.s[0] if self.s.size else 0.0)

    @property
    def rank(self) -> int:
        return int(np.sum(self.s > self.threshold))


def _domain_mask(backend: SurfaceBackend, k: int, band: int | None) -> np.ndarray:
    if band is None:
        return backend.valid_mask(k)
    return backend.band_mask(k, band)


def _target_mask(backend: SurfaceBackend, k: int) -> np.ndarray:
    try:
        backend.check_degree(k)
    except DegreeOutOfRange:
        return np.zeros(backend.coef_shape, dtype=bool)
    return backend.valid_mask(k)


def _factorize(backend: SurfaceBackend, tag: OpTag, k: int, band: int | None) -> _Factorization:
    cache = _FACTOR_CACHE.setdefault(backend, {})
    key = (tag, k, band)
    if key in cache:
        return cache[key]
    backend.check_degree(k)
    shift = _SHIFT[tag]
    domain = _domain_mask(backend, k, band)
    target = _target_mask(backend, k + shift)
    apply = backend.eta_plus if shift > 0 else backend.eta_minus
    cols = []
    for idx in np.flatnonzero(domain.ravel()):
        e = np.zeros(backend.coef_shape, dtype=complex)
        e.flat[idx] = 1.0
        image = apply(e, k)
        cols.append(image[target])
    mat = np.stack(cols, axis=1) if cols else np.zeros((int(target.sum()), 0), dtype=complex)
    u, s, vh = np.linalg.svd(mat, full_matrices=True) if mat.size else (
        np.eye(mat.shape[0], dtype=complex), np.zeros(0), np.eye(mat.shape[1], dtype=complex))
    fac = _Factorization(tag, k, domain, target, u, s, vh)
    cache[key] = fac
    return fac


@dataclass(frozen=True)
class KernelReport:
    backend: str
    tag: OpTag
    k: int
    dim_numeric: int
    dim_formula: int
    gap: float  # smallest retained singular value / threshold
    basis: tuple[np.ndarray, ...] = ()

    @property
    def matches(self) -> bool:
        return self.dim_numeric == self.dim_formula

    def row(self) -> dict:
        return {
            "backend": self.backend,
            "op": self.tag.value,
            "k": self.k,
            "dim_numeric": self.dim_numeric,
            "dim_formula": self.dim_formula,
            "gap": f"{self.gap:.6e}",
        }


KERNEL_CSV_FIELDS = ("backend", "op", "k", "dim_numeric", "dim_formula", "gap")


def kernel_band(backend: SurfaceBackend) -> int | None:
    """Domain band for kernel computations: a quarter of the grid on tori, everything on spheres."""
    if isinstance(backend, TorusSurface):
        return min(backend.resolution) // 4
    return None


def kernel_report(surface: SurfaceBackend, tag: OpTag | str, k: int, band: int | None = None) -> KernelReport:
    """Numerical kernel of ``eta_+/-`` on ``Omega_k`` from the singular values of its matrix."""
    tag = OpTag(tag)
    if tag not in _SHIFT:
        raise ValueError("kernel_report needs EtaPlus or EtaMinus")
    band = kernel_band(surface) if band is None else band
    fac = _factorize(surface, tag, k, band)
    ncols = fac.vh.shape[0]
    rank = fac.rank
    dim = ncols - rank
    thr = fac.threshold
    if rank and thr > 0:
        gap = float(fac.s[rank - 1] / thr)
    else:
        gap = float("inf")
    # the singular values that were declared zero must also sit well below
    smallest_zero = fac.s[rank] if rank < fac.s.size else 0.0
    if gap < GAP_FACTOR or (thr > 0 and smallest_zero > thr / GAP_FACTOR):
        raise TruncationTooTight(f"{tag.value} at k={k}: singular values do not separate (gap {gap:.3g})")
    basis = []
    idx = np.flatnonzero(fac.domain.ravel())
    for row in fac.vh[rank:]:
        c = np.zeros(surface.coef_shape, dtype=complex)
        c.flat[idx] = row.conj()
        basis.append(c)
    return KernelReport(repr(surface), tag, k, dim, kernel_dimension_formula(surface.genus, tag, k), gap, tuple(basis))


def kernel_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=KERNEL_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        writer.writerow(rep.row())
    return buf.getvalue()


class SolveStatus(str, enum.Enum):
    OK = "ok"
    NOT_INJECTIVE = "not_injective"
    NOT_IN_RANGE = "not_in_range"


@dataclass(frozen=True)
class EllipticSolution:
    solution: ModeSection
    residual: float
    relative_residual: float
    status: SolveStatus
    rank: int
    domain_size: int

    @property
    def injective(self) -> bool:
        return self.rank == self.domain_size

    @property
    def in_range(self) -> bool:
        return self.relative_residual <= 1e-8

    @property
    def flagged(self) -> bool:
        return self.status is not SolveStatus.OK


def solve_elliptic(
    tag: OpTag | str, k: int, rhs: ModeSection, band: int | None = None, strict: bool = False
) -> EllipticSolution:
    """Least-squares solve of ``eta u = rhs`` with ``u in Omega_k``.

    Uses the cached SVD of the operator on the band-limited domain. A
    non-injective operator yields the minimum-norm solution and status
    ``not_injective`` (``RankDeficient`` if ``strict``); a right-hand side with
    a component in the cokernel is flagged ``not_in_range``.
    """
    tag = OpTag(tag)
    backend = rhs.backend
    if rhs.k != k + _SHIFT[tag]:
        raise DegreeOutOfRange(f"rhs degree {rhs.k} is not the image of degree {k} under {tag.value}")
    fac = _factorize(backend, tag, k, band)
    rank = fac.rank
    ncols = fac.vh.shape[0]
    if strict and rank < ncols:
        raise RankDeficient(f"{tag.value} on degree {k} has a {ncols - rank}-dimensional kernel")
    b = rhs.coefficients[fac.target]
    outside = rhs.coefficients[~fac.target]
    y = fac.u[:, :rank].conj().T @ b / fac.s[:rank]
    x = fac.vh[:rank].conj().T @ y
    sol = np.zeros(backend.coef_shape, dtype=complex)
    sol.flat[np.flatnonzero(fac.domain.ravel())] = x
    apply = backend.eta_plus if tag is OpTag.ETA_PLUS else backend.eta_minus
    image = apply(sol, k)
    residual = backend.norm(image - rhs.coefficients, rhs.k)
    rel = residual / max(backend.norm(rhs.coefficients, rhs.k), 1e-300)
    if rel > 1e-8 or (outside.size and np.abs(outside).max() > 0):
        status = SolveStatus.NOT_IN_RANGE
    elif rank < ncols:
        status = SolveStatus.NOT_INJECTIVE
    else:
        status = SolveStatus.OK
    return EllipticSolution(ModeSection(backend, k, sol), float(residual), float(rel), status, rank, ncols)


def left_inverse(rhs: ModeSection) -> EllipticSolution:
    """Least-squares left inverse of ``eta_+ : Omega_{-1} -> Omega_0`` applied to ``rhs``."""
    return solve_elliptic(OpTag.ETA_PLUS, rhs.k - 1, rhs)
