"""Closed-surface backends: flat torus, conformal torus and the unit round sphere.

Every backend stores sections of the vertical Fourier bundles ``Omega_k`` as
coefficient arrays of a fixed shape (``coef_shape``) and knows how to move
between coefficients and values on its base grid, integrate, differentiate
(``eta_plus`` / ``eta_minus``) and multiply sections.

Measures are normalised so that the Liouville measure on SM is
``dVol x dtheta / 2pi``; the L2 norm of a section of ``Omega_k`` is then just
its L2 norm on the base.

Torus
    Points are ``x = B s`` with ``s`` in the unit square and ``B`` the matrix
    whose columns are the lattice generators. A section is ``u~(x) e^{ik theta}``
    where ``theta`` is the angle of the unit vector against the orthonormal
    frame ``e^{-lambda} d/dx_j``; ``u~`` is stored by its FFT coefficients
    ``c[n1, n2]`` with ``u~(s) = sum c_n exp(2 pi i n.s)``.
    The Nyquist row/column is kept at zero.

Sphere
    SM of the unit sphere is SO(3) with columns ``(v, x cross v, x)`` written in
    ZYZ Euler angles ``(alpha, beta, gamma)``; ``gamma`` is the fibre angle.
    ``Omega_k`` has the orthonormal basis
    ``sqrt((2l+1)/4pi) e^{i m alpha} d^l_{mk}(beta) e^{ik gamma}``, ``l >= |k|``,
    stored as ``c[l, m + L]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from . import _wigner
from .errors import (
    BandLimitExceeded,
    ConfigParse,
    DegenerateLattice,
    DegreeOutOfRange,
    NonRealConformalFactor,
    ResolutionTooSmall,
)

# relative size below which a coefficient counts as absent for band bookkeeping
_BAND_EPS = 1e-13


class SurfaceKind(str, enum.Enum):
    FLAT_TORUS = "flat_torus"
    ROUND_SPHERE = "round_sphere"
    CONFORMAL_TORUS = "conformal_torus"


@dataclass(frozen=True)
class SurfaceSpec:
    """Plain description of a surface, as read from a config file."""

    kind: SurfaceKind
    resolution: tuple[int, int] = (32, 32)
    lmax: int = 16
    lattice: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    # ((n1, n2), complex coefficient) pairs; lambda(s) = sum c exp(2 pi i n.s)
    conformal_factor: tuple[tuple[tuple[int, int], complex], ...] = ()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SurfaceSpec":
        try:
            kind = SurfaceKind(str(data["kind"]).lower())
        except (KeyError, ValueError) as exc:
            raise ConfigParse(f"surface.kind missing or unknown: {data.get('kind')!r}") from exc
        kw: dict[str, Any] = {"kind": kind}
        if "resolution" in data:
            res = data["resolution"]
            if isinstance(res, int):
                res = (res, res)
            kw["resolution"] = tuple(int(r) for r in res)
        if "lmax" in data or "L" in data:
            kw["lmax"] = int(data.get("lmax", data.get("L")))
        if "lattice" in data:
            kw["lattice"] = tuple(tuple(float(c) for c in v) for v in data["lattice"])
        if "conformal_factor" in data:
            pairs = []
            for item in data["conformal_factor"]:
                if isinstance(item, Mapping):
                    wave, coef = item["wave"], item["coef"]
                else:
                    wave, coef = item
                if isinstance(coef, (list, tuple)):
                    coef = complex(float(coef[0]), float(coef[1]))
                pairs.append(((int(wave[0]), int(wave[1])), complex(coef)))
            kw["conformal_factor"] = tuple(pairs)
        return cls(**kw)


class SurfaceBackend:
    """Interface shared by the concrete backends. Instances are immutable."""

    kind: SurfaceKind
    genus: int
    coef_shape: tuple[int, ...]
    base_shape: tuple[int, ...]
    basis_id: str
    # True when to_grid/from_grid depend on the vertical degree
    degree_dependent_grid: bool = True

    # -- bookkeeping -------------------------------------------------------
    def check_degree(self, k: int) -> None:
        pass

    def valid_mask(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def zeros(self) -> np.ndarray:
        return np.zeros(self.coef_shape, dtype=complex)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.base_shape))

    # -- analysis ----------------------------------------------------------
    def to_grid(self, coef: np.ndarray, k: int) -> np.ndarray:
        raise NotImplementedError

    def from_grid(self, values: np.ndarray, k: int) -> np.ndarray:
        raise NotImplementedError

    def inner(self, c1: np.ndarray, c2: np.ndarray, k: int) -> complex:
        raise NotImplementedError

    def norm(self, coef: np.ndarray, k: int) -> float:
        return float(np.sqrt(max(self.inner(coef, coef, k).real, 0.0)))

    def integrate(self, values: np.ndarray) -> complex:
        """Integral over M of base-grid values against dVol."""
        return complex(np.sum(self.quadrature_weights * values))

    def laplace_weight(self) -> np.ndarray:
        raise NotImplementedError

    def sobolev_norm(self, coef: np.ndarray, k: int, s: float) -> float:
        raise NotImplementedError

    # -- geometry ----------------------------------------------------------
    def eta_plus(self, coef: np.ndarray, k: int) -> np.ndarray:
        raise NotImplementedError

    def eta_minus(self, coef: np.ndarray, k: int) -> np.ndarray:
        raise NotImplementedError

    def curvature_grid(self) -> np.ndarray:
        raise NotImplementedError

    def multiply(self, c1: np.ndarray, k1: int, c2: np.ndarray, k2: int) -> np.ndarray:
        raise NotImplementedError

    def multiply_grid(self, coef: np.ndarray, k: int, values: np.ndarray) -> np.ndarray:
        """Multiply a section by a function given on the base grid (no alias guard)."""
        return self.from_grid(self.to_grid(coef, k) * values, k)

    def random_coefficients(self, k: int, band: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def band_of(self, coef: np.ndarray) -> tuple[int, ...]:
        raise NotImplementedError

    def max_band(self) -> tuple[int, ...]:
        raise NotImplementedError

    def band_mask(self, k: int, band: int) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# torus
# ---------------------------------------------------------------------------


class TorusSurface(SurfaceBackend):
    genus = 1
    basis_id = "torus-fourier"
    degree_dependent_grid = False

    def __init__(
        self,
        resolution: tuple[int, int],
        lattice: np.ndarray,
        lam_coefficients: Sequence[tuple[tuple[int, int], complex]] = (),
        conformal: bool = False,
    ):
        n1, n2 = (int(r) for r in resolution)
        for n in (n1, n2):
            if n < 4:
                raise ResolutionTooSmall(f"torus resolution {n} < 4")
            if n % 2:
                raise ResolutionTooSmall(f"torus resolution {n} must be even")
        basis = np.asarray(lattice, dtype=float).T  # columns are generators
        if basis.shape != (2, 2):
            raise DegenerateLattice("lattice needs two 2-vectors")
        det = float(np.linalg.det(basis))
        if abs(det) < 1e-12 * max(1.0, float(np.abs(basis).max()) ** 2):
            raise DegenerateLattice(f"lattice generators are dependent (det={det:g})")
        self.kind = SurfaceKind.CONFORMAL_TORUS if conformal else SurfaceKind.FLAT_TORUS
        self.resolution = (n1, n2)
        self.lattice = basis.T.copy()
        self.base_shape = (n1, n2)
        self.coef_shape = (n1, n2)
        self._basis = basis
        self.flat_area = abs(det)

        n_1 = np.fft.fftfreq(n1, 1.0 / n1)
        n_2 = np.fft.fftfreq(n2, 1.0 / n2)
        self._n1, self._n2 = np.meshgrid(n_1, n_2, indexing="ij")
        nyq = (self._n1 == -n1 // 2) | (self._n2 == -n2 // 2)
        self._nyquist = nyq
        # dual lattice frequencies xi = B^{-T} n, gradient symbol 2 pi i xi
        binv_t = np.linalg.inv(basis).T
        xi1 = binv_t[0, 0] * self._n1 + binv_t[0, 1] * self._n2
        xi2 = binv_t[1, 0] * self._n1 + binv_t[1, 1] * self._n2
        xi1 = np.where(nyq, 0.0, xi1)
        xi2 = np.where(nyq, 0.0, xi2)
        self._d1 = 2j * np.pi * xi1
        self._d2 = 2j * np.pi * xi2
        self._del = 0.5 * (self._d1 - 1j * self._d2)  # d = (d1 - i d2)/2
        self._delbar = 0.5 * (self._d1 + 1j * self._d2)
        self._mu = (2 * np.pi) ** 2 * (xi1**2 + xi2**2)

        self.lam_coefficients = tuple(lam_coefficients)
        lam_hat = np.zeros((n1, n2), dtype=complex)
        for (w1, w2), c in self.lam_coefficients:
            if abs(w1) >= n1 // 2 or abs(w2) >= n2 // 2:
                raise ResolutionTooSmall(f"conformal factor mode {(w1, w2)} does not fit grid {n1}x{n2}")
            lam_hat[w1 % n1, w2 % n2] += c
        lam = np.fft.ifft2(lam_hat) * (n1 * n2)
        scale = 1.0 + float(np.abs(lam).max())
        if float(np.abs(lam.imag).max()) > 1e-12 * scale:
            raise NonRealConformalFactor("conformal factor coefficients are not Hermitian-symmetric")
        self.conformal_factor = lam.real.copy()
        self._flat = not conformal or not np.any(self.conformal_factor)
        self._lam_hat = lam_hat
        self._e2lam = np.exp(2 * self.conformal_factor)
        cell = self.flat_area / (n1 * n2)
        self.quadrature_weights = cell * self._e2lam
        self.area = float(np.sum(self.quadrature_weights))
        for arr in (self.conformal_factor, self.quadrature_weights):
            arr.setflags(write=False)

    # grid points in physical coordinates
    @cached_property
    def grid_points(self) -> tuple[np.ndarray, np.ndarray]:
        n1, n2 = self.resolution
        s1, s2 = np.meshgrid(np.arange(n1) / n1, np.arange(n2) / n2, indexing="ij")
        x1 = self._basis[0, 0] * s1 + self._basis[0, 1] * s2
        x2 = self._basis[1, 0] * s1 + self._basis[1, 1] * s2
        return x1, x2

    @property
    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        return self._n1, self._n2

    @property
    def is_flat(self) -> bool:
        return self._flat

    def valid_mask(self, k: int) -> np.ndarray:
        return ~self._nyquist

    def to_grid(self, coef, k=0):
        n1, n2 = self.resolution
        return np.fft.ifft2(coef, axes=(-2, -1)) * (n1 * n2)

    def from_grid(self, values, k=0):
        n1, n2 = self.resolution
        out = np.fft.fft2(values) / (n1 * n2)
        out[self._nyquist] = 0.0
        return out

    def inner(self, c1, c2, k=0):
        if self._flat:
            return complex(self.flat_area * np.vdot(c2, c1))
        return self.integrate(self.to_grid(c1) * np.conj(self.to_grid(c2)))

    def laplace_weight(self):
        return self._mu

    def sobolev_norm(self, coef, k, s):
        weight = (1.0 + self._mu + float(k) ** 2) ** (s / 2.0)
        return self.norm(coef * weight, k)

    def eta_plus(self, coef, k):
        if self._flat:
            return self._del * coef
        lam = self.conformal_factor
        g = self.to_grid(coef) * np.exp(-k * lam)
        dg = self.to_grid(self._del * self.from_grid(g))
        return self.from_grid(np.exp((k - 1) * lam) * dg)

    def eta_minus(self, coef, k):
        if self._flat:
            return self._delbar * coef
        lam = self.conformal_factor
        g = self.to_grid(coef) * np.exp(k * lam)
        dg = self.to_grid(self._delbar * self.from_grid(g))
        return self.from_grid(np.exp(-(k + 1) * lam) * dg)

    def eta_plus_stack(self, data: np.ndarray, kmin: int) -> np.ndarray:
        if self._flat:
            return data * self._del
        return np.stack([self.eta_plus(c, kmin + i) for i, c in enumerate(data)])

    def eta_minus_stack(self, data: np.ndarray, kmin: int) -> np.ndarray:
        if self._flat:
            return data * self._delbar
        return np.stack([self.eta_minus(c, kmin + i) for i, c in enumerate(data)])

    def curvature_grid(self):
        if self._flat:
            return np.zeros(self.base_shape)
        lap = self.to_grid(-self._mu * self._lam_hat).real
        return -np.exp(-2 * self.conformal_factor) * lap

    def band_of(self, coef):
        mag = np.abs(coef)
        top = mag.max() if mag.size else 0.0
        if top == 0.0:
            return (0, 0)
        live = mag > _BAND_EPS * top
        return (int(np.abs(self._n1[live]).max()), int(np.abs(self._n2[live]).max()))

    def max_band(self):
        return (self.resolution[0] // 2 - 1, self.resolution[1] // 2 - 1)

    def band_mask(self, k, band):
        return (np.abs(self._n1) <= band) & (np.abs(self._n2) <= band) & ~self._nyquist

    def multiply(self, c1, k1, c2, k2):
        b1, b2 = self.band_of(c1), self.band_of(c2)
        top = self.max_band()
        if b1[0] + b2[0] > top[0] or b1[1] + b2[1] > top[1]:
            raise BandLimitExceeded(f"product band {b1}+{b2} exceeds grid band {top}")
        return self.from_grid(self.to_grid(c1) * self.to_grid(c2))

    def random_coefficients(self, k, band, rng):
        mask = self.band_mask(k, band)
        c = np.zeros(self.coef_shape, dtype=complex)
        cnt = int(mask.sum())
        c[mask] = (rng.standard_normal(cnt) + 1j * rng.standard_normal(cnt)) / np.sqrt(2)
        return c

    def __repr__(self) -> str:
        return f"TorusSurface(kind={self.kind.value}, resolution={self.resolution})"


# ---------------------------------------------------------------------------
# sphere
# ---------------------------------------------------------------------------


class SphereSurface(SurfaceBackend):
    kind = SurfaceKind.ROUND_SPHERE
    genus = 0
    basis_id = "sphere-spin-harmonic"

    def __init__(self, lmax: int):
        lmax = int(lmax)
        if lmax + 1 < 4:
            raise ResolutionTooSmall(f"sphere degree {lmax} gives fewer than 4 polar nodes")
        self.lmax = lmax
        self.n_alpha = 2 * lmax + 2
        self.n_beta = lmax + 1
        self.base_shape = (self.n_alpha, self.n_beta)
        self.coef_shape = (lmax + 1, 2 * lmax + 1)
        nodes, weights = np.polynomial.legendre.leggauss(self.n_beta)
        self.cos_beta = nodes
        self.beta = np.arccos(nodes)
        self.alpha = 2 * np.pi * np.arange(self.n_alpha) / self.n_alpha
        self._gl_weights = weights
        qw = np.outer(np.full(self.n_alpha, 2 * np.pi / self.n_alpha), weights)
        qw.setflags(write=False)
        self.quadrature_weights = qw
        self.area = 4 * np.pi
        self._d = _wigner.wigner_d_table(lmax, self.beta)
        l = np.arange(lmax + 1)
        self._norm = np.sqrt((2 * l + 1) / (4 * np.pi))
        self._l = l[:, None] * np.ones((1, 2 * lmax + 1))
        self._m = (np.arange(2 * lmax + 1) - lmax)[None, :] * np.ones((lmax + 1, 1))
        self._mu = self._l * (self._l + 1)

    # index set {(k, l, m): |k| <= l <= L, |m| <= l}
    def index_set(self) -> list[tuple[int, int, int]]:
        L = self.lmax
        return [(k, l, m) for k in range(-L, L + 1) for l in range(abs(k), L + 1) for m in range(-l, l + 1)]

    def check_degree(self, k):
        if abs(k) > self.lmax:
            raise DegreeOutOfRange(f"|k|={abs(k)} exceeds sphere degree {self.lmax}")

    def valid_mask(self, k):
        return (self._l >= abs(k)) & (np.abs(self._m) <= self._l)

    def to_grid(self, coef, k):
        self.check_degree(k)
        L = self.lmax
        g = np.einsum("lm,l,lmj->mj", coef, self._norm, self._d[:, :, k + L, :])
        spread = np.zeros((self.n_alpha, self.n_beta), dtype=complex)
        spread[np.arange(-L, L + 1) % self.n_alpha] = g
        return np.fft.ifft(spread, axis=0) * self.n_alpha

    def from_grid(self, values, k):
        self.check_degree(k)
        L = self.lmax
        ghat = np.fft.fft(values, axis=0) / self.n_alpha
        g = ghat[np.arange(-L, L + 1) % self.n_alpha]  # (m, j)
        c = 2 * np.pi * np.einsum("mj,j,l,lmj->lm", g, self._gl_weights, self._norm, self._d[:, :, k + L, :])
        return np.where(self.valid_mask(k), c, 0.0)

    def inner(self, c1, c2, k=0):
        return complex(np.vdot(c2, c1))

    def laplace_weight(self):
        return self._mu

    def sobolev_norm(self, coef, k, s):
        weight = (1.0 + self._mu + float(k) ** 2) ** (s / 2.0)
        return float(np.linalg.norm(coef * weight))

    def _eta_factor(self, k: int, sign: int) -> np.ndarray:
        l = self._l[:, 0]
        if sign > 0:
            f = -0.5 * np.sqrt(np.clip((l - k) * (l + k + 1), 0, None))
        else:
            f = 0.5 * np.sqrt(np.clip((l + k) * (l - k + 1), 0, None))
        return f[:, None]

    def eta_plus(self, coef, k):
        self.check_degree(k)
        out = coef * self._eta_factor(k, +1)
        return np.where(self.valid_mask(k + 1), out, 0.0) if abs(k + 1) <= self.lmax else out

    def eta_minus(self, coef, k):
        self.check_degree(k)
        out = coef * self._eta_factor(k, -1)
        return np.where(self.valid_mask(k - 1), out, 0.0) if abs(k - 1) <= self.lmax else out

    def eta_plus_stack(self, data, kmin):
        return np.stack([self.eta_plus(c, kmin + i) for i, c in enumerate(data)])

    def eta_minus_stack(self, data, kmin):
        return np.stack([self.eta_minus(c, kmin + i) for i, c in enumerate(data)])

    def curvature_grid(self):
        return np.ones(self.base_shape)

    def band_of(self, coef):
        mag = np.abs(coef)
        top = mag.max() if mag.size else 0.0
        if top == 0.0:
            return (0,)
        live = mag > _BAND_EPS * top
        return (int(self._l[live].max()),)

    def max_band(self):
        return (self.lmax,)

    def band_mask(self, k, band):
        return self.valid_mask(k) & (self._l <= band)

    def multiply(self, c1, k1, c2, k2):
        (b1,), (b2,) = self.band_of(c1), self.band_of(c2)
        if b1 + b2 > self.lmax:
            raise BandLimitExceeded(f"product degree {b1}+{b2} exceeds L={self.lmax}")
        self.check_degree(k1 + k2)
        return self.from_grid(self.to_grid(c1, k1) * self.to_grid(c2, k2), k1 + k2)

    def random_coefficients(self, k, band, rng):
        mask = self.band_mask(k, band)
        c = np.zeros(self.coef_shape, dtype=complex)
        cnt = int(mask.sum())
        c[mask] = (rng.standard_normal(cnt) + 1j * rng.standard_normal(cnt)) / np.sqrt(2)
        return c

    def __repr__(self) -> str:
        return f"SphereSurface(lmax={self.lmax})"


def build_surface(config: SurfaceSpec | Mapping[str, Any]) -> SurfaceBackend:
    """Construct a backend from a :class:`SurfaceSpec` or an equivalent mapping."""
    spec = config if isinstance(config, SurfaceSpec) else SurfaceSpec.from_mapping(config)
    if spec.kind is SurfaceKind.ROUND_SPHERE:
        return SphereSurface(spec.lmax)
    if spec.kind is SurfaceKind.FLAT_TORUS:
        return TorusSurface(spec.resolution, np.asarray(spec.lattice))
    return TorusSurface(spec.resolution, np.asarray(spec.lattice), spec.conformal_factor, conformal=True)


def curvature(surface: SurfaceBackend) -> np.ndarray:
    """Gaussian curvature sampled on the base grid."""
    return surface.curvature_grid()


def flat_torus(n: int = 32, lattice=((1.0, 0.0), (0.0, 1.0))) -> TorusSurface:
    return TorusSurface((n, n), np.asarray(lattice, dtype=float))


def round_sphere(lmax: int = 16) -> SphereSurface:
    return SphereSurface(lmax)


def conformal_torus(coefficients, n: int = 32) -> TorusSurface:
    """Conformal torus ``e^{2 lambda}|dx|^2`` on the unit square lattice."""
    return TorusSurface((n, n), np.eye(2), tuple(coefficients), conformal=True)


def cosine_factor(eps: float = 0.1) -> tuple[tuple[tuple[int, int], complex], ...]:
    """Coefficients of ``lambda = eps cos(2 pi x_1)``."""
    return (((1, 0), complex(eps / 2)), ((-1, 0), complex(eps / 2)))
