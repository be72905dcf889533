"""Verification suites behind the ``gtl`` subcommands.

Each suite takes a :class:`RunConfig` and returns a :class:`SuiteResult`: a list
of named PASS/FAIL checks plus row tables for plotting. Nothing here touches the
file system, so suites are cheap to call from tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import cone as cone_mod
from .errors import ConfigError, ConfigParse, GTLError, InvalidBidegree, NoConvergence
from .geometry import SphereSurface, SurfaceSpec, TorusSurface, build_surface
from .modes import ModeSection, ModeStack
from .operators import (
    COMMUTATOR_NAMES,
    OpTag,
    adjoint_residual,
    commutator_check,
    default_band,
    kernel_report,
    pestov_check,
    random_stack,
    szego_commutator_check,
)
from .transport import (
    TransportProblem,
    apply_transport,
    flaminio_reconstruct,
    invariant_catalog,
    phi_section,
    stability_batch,
)
from .twistor import (
    CoefficientField,
    DolbeaultTuple,
    bundle_obstruction,
    dbar_omega,
    dbar_omega_solve,
    dolbeault_D,
    extend,
    gauge_residual,
    gauge_term,
    holomorphy_residual,
    planted_mode_growth,
    planted_radial_growth,
    product,
    torus_series,
    trace,
    trace_and_growth,
    unit,
)

DEFAULT_TOLERANCES = {
    "commutator": 1e-8,
    "pestov": 1e-8,
    "pestov_flat": 1e-10,
    "adjoint": 1e-10,
    "szego": 1e-10,
    "kernel_gap": 10.0,
    "recovery": 1e-8,
    "stability_drift": 0.10,
    "exponent_slack": 0.5,
    "holomorphy": 1e-8,
    "algebra": 1e-12,
    "dolbeault": 1e-12,
    "dbar_solve": 1e-14,
    "gauge": 1e-12,
    "obstruction": 1e-10,
    "closed_form": 1e-8,
    "riccati_slope": 1e-6,
    "riccati_consistency": 1e-7,
}

RANDOMIZED = {"verify-structure", "flaminio", "stability", "algebra", "dolbeault"}


@dataclass(frozen=True)
class RunConfig:
    suite: str
    surface: SurfaceSpec | None = None
    seed: int | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)
    params: Mapping[str, Any] = field(default_factory=dict)
    out_dir: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigParse(f"unknown suite {self.suite!r}")
        if self.fmt not in ("csv", "jsonl"):
            raise ConfigParse(f"format must be csv or jsonl, got {self.fmt!r}")
        for name, val in self.tolerances.items():
            if name not in DEFAULT_TOLERANCES:
                raise ConfigParse(f"unknown tolerance {name!r}")
            if not (isinstance(val, (int, float)) and val > 0):
                raise ConfigError(f"tolerance {name} must be positive, got {val!r}")
        if self.suite in RANDOMIZED and self.seed is None:
            raise ConfigError(f"suite {self.suite} is randomized and needs a seed")

    @classmethod
    def from_mapping(cls, suite: str, data: Mapping[str, Any] | None, **overrides) -> "RunConfig":
        data = dict(data or {})
        if not isinstance(data, Mapping):
            raise ConfigParse("config must be a mapping")
        unknown = set(data) - {"surface", "seed", "tolerances", "params", "out_dir", "format"}
        if unknown:
            raise ConfigParse(f"unknown config keys: {sorted(unknown)}")
        surface = data.get("surface")
        if surface is not None:
            if not isinstance(surface, Mapping):
                raise ConfigParse("surface must be a mapping")
            try:
                surface = SurfaceSpec.from_mapping(surface)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigParse(f"bad surface entry: {exc}") from exc
        seed = data.get("seed")
        if overrides.get("seed") is not None:
            seed = overrides["seed"]
        if seed is not None:
            try:
                seed = int(seed)
            except (TypeError, ValueError) as exc:
                raise ConfigParse(f"seed must be an integer, got {seed!r}") from exc
        tol = data.get("tolerances") or {}
        params = data.get("params") or {}
        if not isinstance(tol, Mapping) or not isinstance(params, Mapping):
            raise ConfigParse("tolerances and params must be mappings")
        tol = {k: _as_float(v, k) for k, v in tol.items()}
        fmt = overrides.get("fmt") or data.get("format") or "csv"
        return cls(suite, surface, seed, tol, dict(params), data.get("out_dir"), fmt)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def param(self, name: str, default):
        """Parameter ``name``; scalars are coerced to the type of ``default``."""
        val = self.params.get(name, default)
        if isinstance(default, (bool, list, dict)) or default is None:
            return val
        try:
            return type(default)(val)
        except (TypeError, ValueError) as exc:
            raise ConfigParse(f"params.{name}: cannot read {val!r} as {type(default).__name__}") from exc

    def backend(self, default: Mapping[str, Any]):
        spec = self.surface if self.surface is not None else SurfaceSpec.from_mapping(default)
        return build_surface(spec)


def _as_float(v, name):
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"tolerance {name} is not a number: {v!r}") from exc


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def row(self, suite: str) -> dict:
        return {
            "suite": suite,
            "check": self.name,
            "status": "PASS" if self.passed else "FAIL",
            "value": _fmt(self.value),
            "threshold": _fmt(self.threshold),
            "detail": self.detail,
        }


@dataclass
class SuiteResult:
    suite: str
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, value: float, threshold: float, ok: bool | None = None, detail: str = "") -> Check:
        """Record ``value < threshold`` (or an explicit verdict ``ok``)."""
        if ok is None:
            ok = bool(np.isfinite(value) and value < threshold)
        c = Check(name, bool(ok), float(value), float(threshold), detail)
        self.checks.append(c)
        return c

    def guarded(self, name: str, func: Callable[[], None]) -> None:
        """Run ``func``; a module error becomes a failing check named ``name``."""
        try:
            func()
        except GTLError as exc:
            if isinstance(exc, ConfigError):
                raise
            self.checks.append(Check(name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))

    def table(self, name: str) -> list[dict]:
        return self.tables.setdefault(name, [])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex):
        return f"{x.real!r}{'+' if x.imag >= 0 else '-'}{abs(x.imag)!r}j"
    return repr(float(x))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def run_verify_structure(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("verify-structure")
    b = cfg.backend({"kind": "flat_torus", "resolution": 32})
    trials = int(cfg.param("trials", 100))
    pestov_trials = int(cfg.param("pestov_trials", 100))
    kspan = int(cfg.param("kspan", 3))
    ks = range(-int(cfg.param("pestov_kmax", 4)), int(cfg.param("pestov_kmax", 4)) + 1)
    rows = res.table("commutators")

    def commutators():
        rep = commutator_check(b, trials, cfg.seed, kspan)
        for name in COMMUTATOR_NAMES:
            val = rep.residuals[name]
            rows.append({"backend": repr(b), "identity": name, "max_relative_residual": _fmt(val)})
            res.check(f"commutator {name}", val, cfg.tol("commutator"))

    res.guarded("commutators", commutators)
    prow = res.table("pestov")

    def pestov():
        rng = np.random.default_rng([cfg.seed, 1])
        band = default_band(b)
        worst = worst_flat = 0.0
        for k in ks:
            kw = kf = 0.0
            for _ in range(pestov_trials):
                u = ModeSection(b, k, b.random_coefficients(k, band, rng))
                r = pestov_check(u)
                kw = max(kw, r.residual)
                if isinstance(b, TorusSurface) and b.is_flat:
                    a, c = math.sqrt(r.lhs), math.sqrt(r.rhs)
                    kf = max(kf, abs(a - c) / max(a, c, 1e-300))
            prow.append({"backend": repr(b), "k": k, "max_residual": _fmt(kw)})
            worst, worst_flat = max(worst, kw), max(worst_flat, kf)
        res.check("pestov identity", worst, cfg.tol("pestov"))
        if isinstance(b, TorusSurface) and b.is_flat:
            res.check("flat ||eta+u|| = ||eta-u||", worst_flat, cfg.tol("pestov_flat"))

    res.guarded("pestov identity", pestov)

    def adjoint():
        rng = np.random.default_rng([cfg.seed, 2])
        worst = max(adjoint_residual(b, k, rng) for k in ks for _ in range(10))
        res.check("adjoint eta+* = -eta-", worst, cfg.tol("adjoint"))

    res.guarded("adjoint", adjoint)

    def szego():
        rng = np.random.default_rng([cfg.seed, 3])
        worst = max(szego_commutator_check(random_stack(b, rng, 6 if not isinstance(b, SphereSurface) else min(6, b.lmax - 1))) for _ in range(10))
        res.check("szego commutator", worst, cfg.tol("szego"))

    res.guarded("szego commutator", szego)
    return res


def run_kernels(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("kernels")
    b = cfg.backend({"kind": "round_sphere", "lmax": 16})
    kmax = int(cfg.param("kmax", 5))
    rows = res.table("kernels")
    for tag in (OpTag.ETA_PLUS, OpTag.ETA_MINUS):
        for k in range(-kmax, kmax + 1):
            name = f"{tag.value} k={k}"

            def one(tag=tag, k=k, name=name):
                rep = kernel_report(b, tag, k)
                rows.append(rep.row())
                res.check(
                    name,
                    rep.dim_numeric,
                    rep.dim_formula,
                    ok=rep.matches and rep.gap >= cfg.tol("kernel_gap"),
                    detail=f"formula={rep.dim_formula} gap={rep.gap:.3e}",
                )

            res.guarded(name, one)
    return res


def _num_list(cfg: RunConfig, name: str, default: list, cast) -> list:
    raw = cfg.param(name, default)
    try:
        return [cast(v) for v in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"params.{name} must be a list of numbers, got {raw!r}") from exc


def _parse_complex(v) -> complex:
    try:
        if isinstance(v, str):
            return complex(v.replace(" ", ""))
        if isinstance(v, (list, tuple)):
            return complex(float(v[0]), float(v[1]))
        return complex(v)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigParse(f"not a complex number: {v!r}") from exc


def run_flaminio(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("flaminio")
    b = cfg.backend({"kind": "round_sphere", "lmax": 16})
    phis = [_parse_complex(p) for p in cfg.param("phis", [0, 1, "0.5j"])]
    kspan = int(cfg.param("kspan", 4))
    band = int(cfg.param("band", 8))
    kmax = int(cfg.param("kmax", kspan + 2))
    rng = np.random.default_rng(cfg.seed)
    rows = res.table("reconstruction")
    for phi in phis:
        name = f"recovery phi={_fmt(phi)}"

        def one(phi=phi, name=name):
            u = ModeStack.random(b, -kspan, kspan, band, rng)
            ph = phi_section(b, phi)
            f = apply_transport(ph, u)
            rec = flaminio_reconstruct(TransportProblem(b, ph, f, kmax), u.section(0), u.section(1), kmax)
            err = (rec.stack - u).norm() / u.norm()
            for k, nu, r in rec.per_k:
                rows.append({"phi": _fmt(phi), "k": k, "norm_u_k": _fmt(nu), "residual_k": _fmt(r)})
            res.check(name, err, cfg.tol("recovery"), detail=f"transport residual {rec.residual:.3e}")

        res.guarded(name, one)

    def zero():
        z0 = ModeSection(b, 0, b.zeros())
        z1 = ModeSection(b, 1, b.zeros())
        prob = TransportProblem(b, phi_section(b, 0.0), ModeStack.zeros(b, 0, 0), kmax)
        rec = flaminio_reconstruct(prob, z0, z1, kmax)
        peak = float(np.abs(rec.stack.data).max())
        res.check("zero data gives u = 0", peak, 0.0, ok=peak == 0.0)

    res.guarded("zero data gives u = 0", zero)
    return res


def run_stability(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("stability")
    b = cfg.backend({"kind": "round_sphere", "lmax": 16})
    samples = int(cfg.param("samples", 200))
    s = float(cfg.param("s", 0.0))

    def one():
        tab = stability_batch(
            b,
            samples,
            s,
            cfg.seed,
            int(cfg.param("kspan", 4)),
            int(cfg.param("band", 8)),
            _parse_complex(cfg.param("phi", "0")),
            _parse_complex(cfg.param("zoll_phi", "0.5j")),
        )
        rows = res.table("ratios")
        rmax = zmax = 0.0
        for i, (r, z) in enumerate(zip(tab.ratios, tab.zoll_ratios)):
            rmax, zmax = max(rmax, r), max(zmax, z)
            rows.append(
                {"sample": i, "ratio": _fmt(r), "running_max": _fmt(rmax), "zoll_ratio": _fmt(z), "zoll_running_max": _fmt(zmax)}
            )
        half = max(samples // 2, 1)
        full = tab.running_max()
        drift = abs(full - tab.running_max(half)) / full
        res.check("empirical max finite", full, math.inf, ok=math.isfinite(full), detail=f"max ratio {full:.6e}")
        res.check(f"max stable between {half} and {samples} samples", drift, cfg.tol("stability_drift"))
        zfull = tab.zoll_running_max()
        res.check("zoll ratio finite", zfull, math.inf, ok=math.isfinite(zfull), detail=f"max zoll ratio {zfull:.6e}")

    res.guarded("stability sampling", one)
    return res


def run_trace(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("trace")
    b = cfg.backend({"kind": "flat_torus", "resolution": 4})
    exps = _num_list(cfg, "exponents", [0, 1, 2, 3], int)
    kmax = int(cfg.param("kmax", 2**15))
    order = int(cfg.param("order", 0))
    slack = cfg.tol("exponent_slack")
    rows = res.table("growth")
    if not isinstance(b, TorusSurface):
        raise ConfigError("trace suite runs on a torus backend")
    for p in exps:
        for direction, coeffs in (("modes", planted_mode_growth(p, kmax)), ("radial", planted_radial_growth(p, kmax))):
            name = f"planted {direction} p={p}"

            def one(direction=direction, coeffs=coeffs, p=p, name=name):
                h = torus_series(b, coeffs)
                rep = trace_and_growth(h, order=order)
                if direction == "modes":
                    ok = p - slack <= rep.p_radial <= p + 1 + slack
                else:
                    ok = p - 1 - slack <= rep.p_modes <= p + slack
                ok = ok and rep.verdict
                rows.append(
                    {
                        "planted": direction,
                        "p": p,
                        "p_modes": _fmt(rep.p_modes),
                        "p_radial": _fmt(rep.p_radial),
                        "verdict": "PASS" if rep.verdict else "FAIL",
                    }
                )
                res.check(name, rep.p_radial if direction == "modes" else rep.p_modes, p + 1 + slack, ok=ok,
                          detail=f"p_modes={rep.p_modes:.4f} p_radial={rep.p_radial:.4f}")

            res.guarded(name, one)

    def roundtrip():
        rng = np.random.default_rng(0)
        u = ModeStack.random(b, 0, 16, 1, rng)
        back = trace(extend(u))
        same = back.kmin == u.kmin and np.array_equal(back.data, u.data)
        res.check("trace(extend(u)) == u", 0.0 if same else 1.0, 0.0, ok=same)

    res.guarded("trace(extend(u)) == u", roundtrip)
    return res


def run_algebra(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("algebra")
    b = cfg.backend({"kind": "flat_torus", "resolution": 32})
    pairs = int(cfg.param("pairs", 50))
    band = int(cfg.param("band", 16))
    rng = np.random.default_rng(cfg.seed)
    if not (isinstance(b, TorusSurface) and b.is_flat):
        raise ConfigError("algebra suite needs a flat torus (invariant series are explicit there)")

    def draw():
        c = (rng.standard_normal(band + 1) + 1j * rng.standard_normal(band + 1)) / math.sqrt(2)
        return torus_series(b, c)

    def body():
        worst_hol = worst_assoc = worst_comm = 0.0
        unit_exact = True
        certified = True
        rows = res.table("products")
        one = unit(b)
        for i in range(pairs):
            h1, h2, h3 = draw(), draw(), draw()
            certified &= max(holomorphy_residual(h1).values()) < cfg.tol("holomorphy")
            certified &= max(holomorphy_residual(h2).values()) < cfg.tol("holomorphy")
            p12 = product(h1, h2)
            hol = max(holomorphy_residual(p12).values())
            lhs = product(p12, h3)
            rhs = product(h1, product(h2, h3))
            assoc = (lhs.modes - rhs.modes).norm() / lhs.modes.norm()
            comm = (p12.modes - product(h2, h1).modes).norm() / p12.modes.norm()
            u1 = product(one, h1)
            unit_exact &= u1.m == h1.m and np.array_equal(u1.modes.data, h1.modes.data)
            worst_hol, worst_assoc, worst_comm = max(worst_hol, hol), max(worst_assoc, assoc), max(worst_comm, comm)
            rows.append({"pair": i, "holomorphy_residual": _fmt(hol), "associativity": _fmt(assoc), "commutativity": _fmt(comm)})
        res.check("inputs certified holomorphic", 0.0 if certified else 1.0, 0.0, ok=certified)
        res.check("product holomorphy residual", worst_hol, cfg.tol("holomorphy"))
        res.check("associativity", worst_assoc, cfg.tol("algebra"))
        res.check("commutativity", worst_comm, cfg.tol("algebra"))
        res.check("unit law exact", 0.0 if unit_exact else 1.0, 0.0, ok=unit_exact)

    res.guarded("algebra", body)
    return res


def run_dolbeault(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("dolbeault")
    b = cfg.backend({"kind": "flat_torus", "resolution": 32})
    trials = int(cfg.param("trials", 10))
    deg = int(cfg.param("degree", 4))
    band = int(cfg.param("band", 8))
    rng = np.random.default_rng(cfg.seed)
    rows = res.table("compositions")
    for p in (0, 1, 2):
        name = f"D^({p},1) D^({p},0) = 0"

        def one(p=p, name=name):
            worst = 0.0
            for _ in range(trials):
                t = DolbeaultTuple.random(b, p, 0, deg, deg, band, rng)
                dd = dolbeault_D(dolbeault_D(t))
                worst = max(worst, dd.norm() / t.norm())
            rows.append({"p": p, "max_relative_residual": _fmt(worst)})
            res.check(name, worst, cfg.tol("dolbeault"))

        res.guarded(name, one)

    def solve():
        worst = 0.0
        for _ in range(trials):
            f = CoefficientField.random(b, 0, deg, deg, band, rng)
            g = dbar_omega_solve(f)
            back = dbar_omega(g)
            worst = max(worst, (back - f).norm() / f.norm())
        res.check("dbar_omega(solve(f)) = f", worst, cfg.tol("dbar_solve"))

    res.guarded("dbar_omega(solve(f)) = f", solve)

    def bidegree():
        t = DolbeaultTuple.random(b, 0, 2, 1, 1, 1, rng)
        try:
            dolbeault_D(t)
        except InvalidBidegree:
            res.check("q = 2 rejected", 0.0, 0.0, ok=True)
        else:
            res.check("q = 2 rejected", 1.0, 0.0, ok=False)

    res.guarded("q = 2 rejected", bidegree)
    return res


def run_bundle(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("bundle")
    b = cfg.backend({"kind": "flat_torus", "resolution": 32})
    if not (isinstance(b, TorusSurface) and b.is_flat):
        raise ConfigError("bundle suite needs a flat torus")
    x1, _ = b.grid_points
    rows = res.table("obstructions")

    def gauge():
        psi = ModeSection.from_grid(b, np.exp(2j * np.pi * x1), 0)
        psi_inv = ModeSection.from_grid(b, np.exp(-2j * np.pi * x1), 0)
        a = gauge_term(psi)
        witness = gauge_residual(a, psi_inv)
        literal = gauge_residual(a, psi)
        dev = abs(literal - 2 * a.norm()) / (2 * a.norm())
        obs = bundle_obstruction(a)
        rows.append(
            {
                "case": "planted gauge",
                "period": _fmt(obs.period),
                "reduced_period": _fmt(obs.reduced_period),
                "integral": _fmt(obs.integral),
                "flagged": str(obs.flagged),
            }
        )
        res.check("gauge residual with witness psi^-1", witness, cfg.tol("gauge"))
        res.check("literal psi leaves 2||a||", dev, cfg.tol("gauge"))
        res.check("planted a_{-1} = a_1 = pi i", abs(a.coef(-1)[0, 0] - 1j * np.pi) + abs(a.coef(1)[0, 0] - 1j * np.pi), cfg.tol("gauge"))
        res.check("planted obstruction integral vanishes", abs(obs.integral), cfg.tol("obstruction"))
        res.check("planted period vanishes mod lattice", abs(obs.reduced_period), cfg.tol("obstruction"))

    res.guarded("planted gauge", gauge)

    def sections(a0_vals, am1=None):
        secs = {0: ModeSection.from_grid(b, a0_vals, 0)}
        if am1 is not None:
            secs[-1] = ModeSection.from_grid(b, am1, -1)
        return ModeStack.from_sections(b, secs)

    def means():
        c = _parse_complex(cfg.param("a0_mean", "0.25"))
        obs = bundle_obstruction(sections(np.full(b.base_shape, c)))
        rows.append({"case": "constant a0", "period": _fmt(obs.period), "reduced_period": _fmt(obs.reduced_period),
                     "integral": _fmt(obs.integral), "flagged": str(obs.flagged)})
        res.check("nonzero mean a0 flagged", abs(obs.integral - c * b.area), cfg.tol("obstruction"), ok=obs.flagged and abs(obs.integral - c * b.area) < 1e-12)
        obs = bundle_obstruction(sections(np.cos(2 * np.pi * x1).astype(complex)))
        rows.append({"case": "a0 = cos(2 pi x1)", "period": _fmt(obs.period), "reduced_period": _fmt(obs.reduced_period),
                     "integral": _fmt(obs.integral), "flagged": str(obs.flagged)})
        res.check("cos a0 integrates to zero", abs(obs.integral), cfg.tol("obstruction"))
        obs = bundle_obstruction(ModeStack.zeros(b, -1, 0))
        res.check("zero data unobstructed", abs(obs.integral) + abs(obs.period), cfg.tol("obstruction"))

    res.guarded("obstruction functionals", means)

    def trivial_gauge():
        inv = invariant_catalog(b, [1.0, 0.5, 0.25])
        one = ModeSection.constant(b, 1.0)
        r = gauge_residual(ModeStack.zeros(b, 0, 0), one, inv.stack)
        res.check("a = 0, psi = 1, invariant w", r, cfg.tol("gauge"))

    res.guarded("a = 0, psi = 1, invariant w", trivial_gauge)
    return res


def _profiles(cfg: RunConfig) -> list[cone_mod.CurvatureProfile]:
    raw = cfg.param(
        "profiles",
        [
            {"type": "constant", "value": 1.0},
            {"type": "constant", "value": 0.0},
            {"type": "constant", "value": -1.0},
            {"type": "sin", "base": -1.0, "amplitude": 0.5},
        ],
    )
    if not isinstance(raw, list):
        raise ConfigParse("params.profiles must be a list")
    return [cone_mod.CurvatureProfile.from_mapping(p) for p in raw]


def _closed_form(value: float, t: np.ndarray):
    """Solution of xdot = -y, ydot = K x from (0, 1) at t = 0 for constant K."""
    if value > 0:
        w = math.sqrt(value)
        return -np.sin(w * t) / w, np.cos(w * t)
    if value < 0:
        w = math.sqrt(-value)
        return -np.sinh(w * t) / w, np.cosh(w * t)
    return -t, np.ones_like(t)


def run_cone(cfg: RunConfig) -> SuiteResult:
    res = SuiteResult("cone")
    T = float(cfg.param("T", 10.0))
    horizons = tuple(_num_list(cfg, "horizons", [20.0, 40.0, 80.0], float))
    seed_xi = tuple(_num_list(cfg, "generic_seed", [0.3, 1.0], float))
    traj_rows = res.table("trajectories")
    conj_rows = res.table("conjugate_times")
    lim_rows = res.table("riccati_limits")
    for prof in _profiles(cfg):
        label = prof.label()

        def one(prof=prof, label=label):
            traj = cone_mod.integrate_projective(prof, (0.0, 1.0), T, normalized=False)
            for t, x, y in zip(traj.t, traj.x, traj.y):
                traj_rows.append({"profile": label, "t": _fmt(t), "x": _fmt(x), "y": _fmt(y)})
            rep = cone_mod.crossing_analysis(traj)
            for t, d in zip(rep.conjugate_times, rep.transversal[len(rep.crossings) - len(rep.conjugate_times):]):
                conj_rows.append({"profile": label, "conjugate_time": _fmt(t), "minus_y": _fmt(d)})
            if prof.kind == "constant":
                xc, yc = _closed_form(prof.value, traj.t)
                scale = np.maximum(1.0, np.hypot(xc, yc))
                err = float(np.max(np.hypot(traj.x - xc, traj.y - yc) / scale))
                res.check(f"{label}: closed form", err, cfg.tol("closed_form"))
                want = math.floor(T * math.sqrt(prof.value) / math.pi) if prof.value > 0 else 0
                res.check(f"{label}: conjugate count", len(rep.conjugate_times), want, ok=len(rep.conjugate_times) == want,
                          detail=f"expected {want}")
                if prof.value > 0:
                    exact = math.pi / math.sqrt(prof.value) * np.arange(1, want + 1)
                    dev = float(np.max(np.abs(np.asarray(rep.conjugate_times) - exact))) if want else 0.0
                    res.check(f"{label}: conjugate times", dev, cfg.tol("closed_form"))
            generic = cone_mod.integrate_projective(prof, seed_xi, T)
            res.check(f"{label}: riccati consistency", cone_mod.riccati_consistency(generic), cfg.tol("riccati_consistency"))
            try:
                lim = cone_mod.riccati_limits(prof, horizons, cfg.tol("riccati_slope"))
            except NoConvergence as exc:
                lim_rows.append({"profile": label, "r_u": "nan", "r_s": "nan", "gap": "nan", "verdict": "no convergence"})
                expected = prof.kind == "constant" and prof.value > 0
                name = f"{label}: no riccati limit (conjugate points)" if expected else f"{label}: riccati limits"
                res.check(name, math.nan, math.nan, ok=expected, detail=str(exc))
                return
            lim_rows.append({"profile": label, "r_u": _fmt(lim.r_u), "r_s": _fmt(lim.r_s), "gap": _fmt(lim.gap), "verdict": lim.verdict})
            if prof.kind == "constant" and prof.value < 0:
                w = math.sqrt(-prof.value)
                dev = max(abs(abs(lim.r_u) - w), abs(abs(lim.r_s) - w))
                if lim.r_u * lim.r_s >= 0:
                    dev = math.inf
                res.check(f"{label}: slopes +-sqrt(-K)", dev, cfg.tol("riccati_slope"), detail=lim.verdict)
            elif prof.kind == "constant" and prof.value == 0:
                res.check(f"{label}: cone collapsed", lim.gap, cfg.tol("riccati_slope"), ok=not lim.separated, detail=lim.verdict)
            else:
                res.check(f"{label}: limits converge", lim.gap, cfg.tol("riccati_slope"), ok=True, detail=lim.verdict)

        res.guarded(label, one)
    return res


SUITES: dict[str, Callable[[RunConfig], SuiteResult]] = {
    "verify-structure": run_verify_structure,
    "kernels": run_kernels,
    "flaminio": run_flaminio,
    "stability": run_stability,
    "trace": run_trace,
    "algebra": run_algebra,
    "dolbeault": run_dolbeault,
    "bundle": run_bundle,
    "cone": run_cone,
}

SUITE_CHECKS = {
    "verify-structure": "six commutator identities, Pestov identity, adjoint identity, Szego commutator",
    "kernels": "dim ker eta+/- against closed formulas with singular-value gap",
    "flaminio": "recovery of planted stacks from (u0, u1, f) and the zero-data case",
    "stability": "empirical stability ratio maximum, finiteness and drift, Zoll variant",
    "trace": "planted mode and radial growth exponents, trace/extension round trip",
    "algebra": "product closure, associativity, commutativity, unit law",
    "dolbeault": "D^(p,1) D^(p,0) = 0 for p = 0, 1, 2, dbar_omega solver, q = 2 rejection",
    "bundle": "gauge residuals, obstruction period and integral, flagging",
    "cone": "closed forms, conjugate times, Riccati limits and consistency",
}


def run_suite(cfg: RunConfig) -> SuiteResult:
    return SUITES[cfg.suite](cfg)
