"""Vertical Fourier modes of functions on SM.

A :class:`ModeStack` holds the sections ``u_k`` for ``kmin <= k <= kmax`` as one
array ``data[k - kmin]`` of backend coefficients. Stacks are treated as
immutable; every operation returns a new stack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping

import numpy as np

from .errors import EmptyStack, NonUniformGrid, ThetaGridTooSmall
from .geometry import SurfaceBackend


@dataclass(frozen=True, eq=False)
class ModeSection:
    """One section of ``Omega_k`` in the backend's coefficient layout."""

    backend: SurfaceBackend
    k: int
    coefficients: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=complex)
        if coef.shape != self.backend.coef_shape:
            raise ValueError(f"coefficient shape {coef.shape} != backend shape {self.backend.coef_shape}")
        self.backend.check_degree(self.k)
        outside = coef[~self.backend.valid_mask(self.k)]
        if outside.size and np.abs(outside).max() > 0:
            raise ValueError(f"coefficients outside the degree-{self.k} index set are nonzero")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    def norm(self) -> float:
        return self.backend.norm(self.coefficients, self.k)

    def apply_v(self) -> "ModeSection":
        return ModeSection(self.backend, self.k, 1j * self.k * self.coefficients)

    def grid(self) -> np.ndarray:
        return self.backend.to_grid(self.coefficients, self.k)

    @classmethod
    def from_grid(cls, backend: SurfaceBackend, values: np.ndarray, k: int) -> "ModeSection":
        return cls(backend, k, backend.from_grid(values, k))

    @classmethod
    def constant(cls, backend: SurfaceBackend, value: complex = 1.0) -> "ModeSection":
        return cls.from_grid(backend, np.full(backend.base_shape, value, dtype=complex), 0)


@dataclass(frozen=True, eq=False)
class ModeStack:
    """Finite family of vertical modes ``u_k``, ``kmin <= k <= kmax``.

    ``discarded_tail`` records the squared L2 mass dropped by any truncation that
    produced this stack.
    """

    backend: SurfaceBackend
    kmin: int
    data: np.ndarray
    discarded_tail: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 1 + len(self.backend.coef_shape) or data.shape[1:] != self.backend.coef_shape:
            raise ValueError(f"stack data shape {data.shape} incompatible with backend {self.backend.coef_shape}")
        for i in range(data.shape[0]):
            self.backend.check_degree(self.kmin + i)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    # construction --------------------------------------------------------
    @classmethod
    def zeros(cls, backend: SurfaceBackend, kmin: int, kmax: int) -> "ModeStack":
        return cls(backend, kmin, np.zeros((kmax - kmin + 1, *backend.coef_shape), dtype=complex))

    @classmethod
    def from_sections(cls, backend: SurfaceBackend, sections: Mapping[int, np.ndarray | ModeSection]) -> "ModeStack":
        if not sections:
            raise EmptyStack("no sections given")
        kmin, kmax = min(sections), max(sections)
        data = np.zeros((kmax - kmin + 1, *backend.coef_shape), dtype=complex)
        for k, sec in sections.items():
            data[k - kmin] = sec.coefficients if isinstance(sec, ModeSection) else sec
        return cls(backend, kmin, data)

    @classmethod
    def random(
        cls, backend: SurfaceBackend, kmin: int, kmax: int, band: int, rng: np.random.Generator
    ) -> "ModeStack":
        data = np.stack([backend.random_coefficients(k, band, rng) for k in range(kmin, kmax + 1)])
        return cls(backend, kmin, data)

    # access --------------------------------------------------------------
    @property
    def kmax(self) -> int:
        return self.kmin + self.data.shape[0] - 1

    @property
    def degrees(self) -> range:
        return range(self.kmin, self.kmax + 1)

    def __len__(self) -> int:
        return self.data.shape[0]

    def coef(self, k: int) -> np.ndarray:
        if self.kmin <= k <= self.kmax:
            return self.data[k - self.kmin]
        return self.backend.zeros()

    def section(self, k: int) -> ModeSection:
        return ModeSection(self.backend, k, self.coef(k))

    def items(self) -> Iterator[tuple[int, ModeSection]]:
        for k in self.degrees:
            yield k, self.section(k)

    @property
    def is_fibrewise_holomorphic(self) -> bool:
        neg = self.data[: max(0, -self.kmin)]
        return self.kmin >= 0 or not np.any(neg)

    # reshaping -----------------------------------------------------------
    def padded(self, kmin: int, kmax: int) -> "ModeStack":
        """Same stack stored on ``[kmin, kmax]``; modes outside are dropped (tail recorded)."""
        out = np.zeros((kmax - kmin + 1, *self.backend.coef_shape), dtype=complex)
        lost = 0.0
        for k in self.degrees:
            c = self.data[k - self.kmin]
            if kmin <= k <= kmax:
                out[k - kmin] = c
            elif np.any(c):
                lost += self.backend.norm(c, k) ** 2
        return ModeStack(self.backend, kmin, out, self.discarded_tail + lost)

    def trimmed(self) -> "ModeStack":
        live = [i for i in range(len(self)) if np.any(self.data[i])]
        if not live:
            return ModeStack(self.backend, self.kmin, self.data[:1] * 0, self.discarded_tail)
        return ModeStack(self.backend, self.kmin + live[0], self.data[live[0] : live[-1] + 1], self.discarded_tail)

    def map_data(self, func) -> "ModeStack":
        return ModeStack(self.backend, self.kmin, func(self.data), self.discarded_tail)

    # algebra -------------------------------------------------------------
    def _aligned(self, other: "ModeStack") -> tuple["ModeStack", "ModeStack"]:
        if other.backend is not self.backend:
            raise ValueError("stacks live on different backends")
        lo, hi = min(self.kmin, other.kmin), max(self.kmax, other.kmax)
        return self.padded(lo, hi), other.padded(lo, hi)

    def __add__(self, other: "ModeStack") -> "ModeStack":
        a, b = self._aligned(other)
        return ModeStack(self.backend, a.kmin, a.data + b.data, a.discarded_tail + b.discarded_tail)

    def __sub__(self, other: "ModeStack") -> "ModeStack":
        a, b = self._aligned(other)
        return ModeStack(self.backend, a.kmin, a.data - b.data, a.discarded_tail + b.discarded_tail)

    def __mul__(self, scalar: complex) -> "ModeStack":
        return ModeStack(self.backend, self.kmin, self.data * scalar, self.discarded_tail)

    __rmul__ = __mul__

    def __neg__(self) -> "ModeStack":
        return self * -1

    # norms ---------------------------------------------------------------
    def mode_l2(self) -> np.ndarray:
        return np.array([self.backend.norm(self.data[i], self.kmin + i) for i in range(len(self))])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.mode_l2() ** 2)))

    def inner(self, other: "ModeStack") -> complex:
        a, b = self._aligned(other)
        return complex(sum(self.backend.inner(a.data[i], b.data[i], a.kmin + i) for i in range(len(a))))


# ---------------------------------------------------------------------------
# SM grid transforms
# ---------------------------------------------------------------------------


def theta_grid(ntheta: int) -> np.ndarray:
    return 2 * np.pi * np.arange(ntheta) / ntheta


def synthesize(stack: ModeStack, ntheta: int | None = None) -> np.ndarray:
    """Values of ``sum_k u_k`` on the SM grid, shape ``base_shape + (ntheta,)``.

    Degrees are folded modulo ``ntheta``, so grid values are exact for any grid
    size; ``ntheta`` defaults to the smallest grid that resolves the stack.
    """
    if ntheta is None:
        ntheta = 2 * max(abs(stack.kmin), abs(stack.kmax)) + 1
    backend = stack.backend
    bins = np.arange(stack.kmin, stack.kmax + 1) % ntheta
    if backend.degree_dependent_grid:
        base = np.stack([backend.to_grid(stack.data[i], stack.kmin + i) for i in range(len(stack))])
        spread = np.zeros((ntheta, *backend.base_shape), dtype=complex)
        np.add.at(spread, bins, base)
    else:
        folded = np.zeros((ntheta, *backend.coef_shape), dtype=complex)
        np.add.at(folded, bins, stack.data)
        spread = backend.to_grid(folded)
    vals = np.fft.ifft(spread, axis=0) * ntheta
    return np.moveaxis(vals, 0, -1)


def decompose(
    backend: SurfaceBackend, samples: np.ndarray, kmax: int, theta: np.ndarray | None = None
) -> ModeStack:
    """Split SM-grid samples into vertical modes ``|k| <= kmax``.

    ``samples`` has shape ``base_shape + (ntheta,)`` on the uniform fibre grid
    ``theta_j = 2 pi j / ntheta``. Energy in degrees above ``kmax`` is recorded in
    ``discarded_tail``.
    """
    samples = np.asarray(samples, dtype=complex)
    ntheta = samples.shape[-1]
    if samples.shape[:-1] != backend.base_shape:
        raise ValueError(f"samples shape {samples.shape} does not match base grid {backend.base_shape}")
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        if theta.size != ntheta or not np.allclose(theta, theta_grid(ntheta), atol=1e-12):
            raise NonUniformGrid("fibre grid must be theta_j = 2 pi j / ntheta")
    if ntheta < 2 * kmax + 1:
        raise ThetaGridTooSmall(f"ntheta={ntheta} cannot resolve |k| <= {kmax}")
    spec = np.fft.fft(samples, axis=-1) / ntheta
    data = np.stack([backend.from_grid(spec[..., k % ntheta], k) for k in range(-kmax, kmax + 1)])
    kept = {k % ntheta for k in range(-kmax, kmax + 1)}
    tail = 0.0
    for j in range(ntheta):
        if j not in kept:
            tail += float(np.real(backend.integrate(np.abs(spec[..., j]) ** 2)))
    return ModeStack(backend, -kmax, data, tail)


def sm_integral(backend: SurfaceBackend, values: np.ndarray) -> complex:
    """Integral over SM of grid values against ``dVol dtheta / 2pi``."""
    return backend.integrate(values.mean(axis=-1))


def szego(stack: ModeStack) -> ModeStack:
    """Drop the negative vertical modes."""
    if stack.kmin >= 0:
        return stack
    if stack.kmax < 0:
        return ModeStack.zeros(stack.backend, 0, 0)
    return ModeStack(stack.backend, 0, stack.data[-stack.kmin :], stack.discarded_tail)


@dataclass(frozen=True)
class ModeNorms:
    degrees: np.ndarray
    l2: np.ndarray
    hs: np.ndarray
    s: float
    total_l2: float
    total_hs: float
    exponent: float  # fitted p in ||u_k|| ~ <k>^p; -inf when modes stop
    fit_residual: float
    rapid_decay: bool


def japanese(k) -> np.ndarray:
    return np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)


def fit_exponent(ks: np.ndarray, values: np.ndarray) -> tuple[float, float, bool]:
    """Least-squares slope of ``log values`` against ``log <k>`` over ``|k| >= 2``.

    Returns ``(p, rms residual, rapid_decay)``; ``rapid_decay`` is set when the
    sequence is exactly zero past some degree.
    """
    ks = np.asarray(ks)
    values = np.asarray(values, dtype=float)
    sel = np.abs(ks) >= 2
    ks, values = ks[sel], values[sel]
    if ks.size == 0:
        return float("nan"), float("nan"), False
    top = values.max()
    live = values > 1e-14 * top if top > 0 else np.zeros_like(values, dtype=bool)
    if not live.any():
        return float("-inf"), 0.0, True
    if np.abs(ks[~live]).size and np.abs(ks[~live]).max() > np.abs(ks[live]).max():
        return float("-inf"), 0.0, True
    x = np.log(japanese(ks[live]))
    y = np.log(values[live])
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan"), float("nan"), False
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2))), False


def mode_norms(stack: ModeStack, s: float = 0.0) -> ModeNorms:
    """Per-mode L2 and H^s norms plus an algebraic decay fit."""
    if len(stack) == 0:
        raise EmptyStack("stack has no modes")
    backend = stack.backend
    ks = np.arange(stack.kmin, stack.kmax + 1)
    l2 = stack.mode_l2()
    hs = np.array([backend.sobolev_norm(stack.data[i], int(k), s) for i, k in enumerate(ks)])
    p, res, rapid = fit_exponent(ks, l2)
    return ModeNorms(
        degrees=ks,
        l2=l2,
        hs=hs,
        s=float(s),
        total_l2=float(np.sqrt(np.sum(l2**2))),
        total_hs=float(np.sqrt(np.sum(hs**2))),
        exponent=p,
        fit_residual=res,
        rapid_decay=rapid,
    )


def hs_norm(stack: ModeStack, s: float) -> float:
    return mode_norms(stack, s).total_hs


# ---------------------------------------------------------------------------
# JSON-lines serialisation
# ---------------------------------------------------------------------------


def _pairs(coef: np.ndarray) -> list[list[float]]:
    flat = np.asarray(coef).ravel()
    return [[float(z.real), float(z.imag)] for z in flat]


def section_record(backend: SurfaceBackend, k: int, coef: np.ndarray, **header) -> dict:
    rec = dict(header)
    rec.update(
        {
            "k": int(k),
            "basis_id": backend.basis_id,
            "shape": list(backend.coef_shape),
            "coefficients": _pairs(coef),
        }
    )
    return rec


def stack_records(stack: ModeStack, **header) -> Iterable[dict]:
    for i in range(len(stack)):
        yield section_record(stack.backend, stack.kmin + i, stack.data[i], **header)


def write_jsonl(stack: ModeStack, fp: IO[str], **header) -> None:
    for rec in stack_records(stack, **header):
        fp.write(json.dumps(rec, sort_keys=True) + "\n")


def coefficients_from_record(backend: SurfaceBackend, rec: Mapping) -> np.ndarray:
    if rec["basis_id"] != backend.basis_id:
        raise ValueError(f"record basis {rec['basis_id']!r} does not match backend {backend.basis_id!r}")
    arr = np.array([complex(re, im) for re, im in rec["coefficients"]], dtype=complex)
    return arr.reshape(tuple(rec["shape"]))


def read_jsonl(backend: SurfaceBackend, fp: IO[str]) -> ModeStack:
    sections = {}
    for line in fp:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        sections[int(rec["k"])] = coefficients_from_record(backend, rec)
    return ModeStack.from_sections(backend, sections)
