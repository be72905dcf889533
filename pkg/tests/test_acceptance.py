"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v`` (lines are printed with capture
disabled) or ``python tests/test_acceptance.py`` for the bare report.
"""

from __future__ import annotations

import math
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from gtlab.cli import write_result
from gtlab.cone import CurvatureProfile, crossing_analysis, integrate_projective, riccati_consistency, riccati_limits
from gtlab.geometry import conformal_torus, cosine_factor, flat_torus, round_sphere
from gtlab.modes import ModeSection, ModeStack
from gtlab.operators import (
    COMMUTATOR_NAMES,
    OpTag,
    commutator_check,
    default_band,
    kernel_report,
    pestov_check,
)
from gtlab.suites import SUITES, RunConfig, run_suite
from gtlab.transport import (
    TransportProblem,
    apply_transport,
    flaminio_reconstruct,
    phi_section,
    sphere_certificate,
    stability_batch,
)
from gtlab.twistor import (
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

sys.path.insert(0, str(Path(__file__).resolve().parent))
from oracles import jacobi_closed_form  # noqa: E402

_BACKENDS = {}


def backends():
    if not _BACKENDS:
        _BACKENDS["flat_torus"] = flat_torus(32)
        _BACKENDS["round_sphere"] = round_sphere(16)
        _BACKENDS["conformal_torus"] = conformal_torus(cosine_factor(0.1), 32)
    return _BACKENDS


def crit_structure():
    worst = {}
    for name, b in backends().items():
        rep = commutator_check(b, trials=100, seed=0)
        assert set(rep.residuals) == set(COMMUTATOR_NAMES)
        worst[name] = rep.max_residual()
    top = max(worst.values())
    return top < 1e-8, "max residual " + ", ".join(f"{k}={v:.2e}" for k, v in worst.items())


def crit_pestov():
    worst, flat_eq = 0.0, 0.0
    for name, b in backends().items():
        rng = np.random.default_rng(2)
        band = default_band(b)
        for k in range(-4, 5):
            for _ in range(100):
                u = ModeSection(b, k, b.random_coefficients(k, band, rng))
                r = pestov_check(u)
                worst = max(worst, r.residual)
                if name == "flat_torus":
                    a, c = math.sqrt(r.lhs), math.sqrt(r.rhs)
                    flat_eq = max(flat_eq, abs(a - c) / max(a, c))
    return worst < 1e-8 and flat_eq < 1e-10, f"max residual {worst:.2e}, flat |eta+|-|eta-| {flat_eq:.2e}"


def crit_kernels():
    bad, min_gap = [], math.inf
    for name in ("round_sphere", "flat_torus"):
        b = backends()[name]
        for tag in (OpTag.ETA_PLUS, OpTag.ETA_MINUS):
            for k in range(-5, 6):
                rep = kernel_report(b, tag, k)
                min_gap = min(min_gap, rep.gap)
                if not rep.matches:
                    bad.append(f"{name}:{tag.value}:{k}")
    return not bad and min_gap >= 10, f"44 kernels, mismatches {bad or 'none'}, min gap {min_gap:.2e}"


def crit_flaminio():
    b = backends()["round_sphere"]
    rng = np.random.default_rng(4)
    errs = []
    for phi in (0.0, 1.0, 0.5j):
        u = ModeStack.random(b, -4, 4, 8, rng)
        ph = phi_section(b, phi)
        f = apply_transport(ph, u)
        rec = flaminio_reconstruct(TransportProblem(b, ph, f, 6), u.section(0), u.section(1), 6)
        errs.append((rec.stack - u).norm() / u.norm())
    z = ModeSection(b, 0, b.zeros())
    prob = TransportProblem(b, phi_section(b, 0.0), ModeStack.zeros(b, 0, 0), 6)
    zero = flaminio_reconstruct(prob, z, ModeSection(b, 1, b.zeros()), 6)
    exact_zero = not np.any(zero.stack.data)
    return max(errs) < 1e-8 and exact_zero, f"recovery errors {[f'{e:.1e}' for e in errs]}, zero data exact {exact_zero}"


def crit_stability():
    tab = stability_batch(backends()["round_sphere"], samples=200, s=0.0, seed=0)
    full, half = tab.running_max(), tab.running_max(100)
    drift = abs(full - half) / full
    return math.isfinite(full) and drift < 0.10, f"max ratio {full:.4f} (100 samples {half:.4f}, drift {drift:.1%})"


def crit_trace():
    b = flat_torus(4)
    parts, ok = [], True
    for p in range(4):
        m = trace_and_growth(torus_series(b, planted_mode_growth(p, 2**15)))
        r = trace_and_growth(torus_series(b, planted_radial_growth(p, 2**15)))
        ok &= p - 0.5 <= m.p_radial <= p + 1.5 and p - 1.5 <= r.p_modes <= p + 0.5
        parts.append(f"p={p}: radial {m.p_radial:.2f}, modes {r.p_modes:.2f}")
    u = ModeStack.random(backends()["flat_torus"], 0, 12, 4, np.random.default_rng(6))
    back = trace(extend(u))
    exact = back.kmin == u.kmin and np.array_equal(back.data, u.data)
    return ok and exact, "; ".join(parts) + f"; trace(extend) exact {exact}"


def crit_algebra():
    b = backends()["flat_torus"]
    rng = np.random.default_rng(7)

    def draw():
        return torus_series(b, rng.standard_normal(17) + 1j * rng.standard_normal(17))

    hol = assoc = 0.0
    unit_ok = certified = True
    one = unit(b)
    for _ in range(50):
        h1, h2, h3 = draw(), draw(), draw()
        certified &= max(holomorphy_residual(h1).values()) < 1e-8 and max(holomorphy_residual(h2).values()) < 1e-8
        p = product(h1, h2)
        hol = max(hol, max(holomorphy_residual(p).values()))
        lhs, rhs = product(p, h3), product(h1, product(h2, h3))
        assoc = max(assoc, (lhs.modes - rhs.modes).norm() / lhs.modes.norm())
        u = product(one, h1)
        unit_ok &= np.array_equal(u.modes.data, h1.modes.data)
    ok = certified and hol < 1e-8 and unit_ok and assoc < 1e-12
    return ok, f"holomorphy residual {hol:.1e}, unit exact {unit_ok}, associativity {assoc:.1e} (machine precision)"


def crit_dolbeault():
    b = backends()["flat_torus"]
    rng = np.random.default_rng(8)
    worst = 0.0
    for p in (0, 1, 2):
        for _ in range(10):
            t = DolbeaultTuple.random(b, p, 0, 4, 4, 8, rng)
            worst = max(worst, dolbeault_D(dolbeault_D(t)).norm() / t.norm())
    solve = 0.0
    for _ in range(10):
        f = CoefficientField.random(b, 0, 4, 4, 8, rng)
        solve = max(solve, (dbar_omega(dbar_omega_solve(f)) - f).norm() / f.norm())
    return worst < 1e-12 and solve < 1e-14, f"max |D D t|/|t| {worst:.1e}, dbar solve {solve:.1e}"


def crit_bundle():
    b = backends()["flat_torus"]
    x1, _ = b.grid_points
    psi = ModeSection.from_grid(b, np.exp(2j * np.pi * x1), 0)
    psi_inv = ModeSection.from_grid(b, np.exp(-2j * np.pi * x1), 0)
    a = gauge_term(psi)
    witness = gauge_residual(a, psi_inv)
    literal = gauge_residual(a, psi)
    obs = bundle_obstruction(a)
    mean = bundle_obstruction(ModeStack.from_sections(b, {0: ModeSection.constant(b, 0.25)}))
    ok = witness < 1e-12 and abs(obs.integral) < 1e-12 and mean.flagged
    return ok, (
        f"gauge residual {witness:.1e} with witness psi^-1 "
        f"(same psi on both sides leaves {literal:.4f} = 2||a||), "
        f"integral {abs(obs.integral):.1e}, nonzero-mean a0 flagged {mean.flagged}"
    )


def crit_cone():
    T = 10.0
    closed = 0.0
    for K in (1.0, 0.0, -1.0):
        traj = integrate_projective(CurvatureProfile.constant(K), (0.0, 1.0), T, normalized=False)
        x, y = jacobi_closed_form(K, traj.t)
        closed = max(closed, float(np.max(np.hypot(traj.x - x, traj.y - y) / np.maximum(1.0, np.hypot(x, y)))))
    rep = crossing_analysis(integrate_projective(CurvatureProfile.constant(1.0), (0.0, 1.0), T))
    count_ok = len(rep.conjugate_times) == math.floor(T / math.pi)
    lim = riccati_limits(CurvatureProfile.constant(-1.0))
    slope = max(abs(max(lim.r_u, lim.r_s) - 1.0), abs(min(lim.r_u, lim.r_s) + 1.0))
    flat = riccati_limits(CurvatureProfile.constant(0.0))
    cons = max(
        riccati_consistency(integrate_projective(p, (0.3, 1.0), T))
        for p in (
            CurvatureProfile.constant(-1.0),
            CurvatureProfile.constant(1.0),
            CurvatureProfile.sine(-1.0, 0.5),
            CurvatureProfile.table([0.0, 4.0, 10.0], [-1.0, 0.5, -2.0]),
        )
    )
    ok = closed < 1e-8 and count_ok and slope < 1e-6 and not flat.separated and cons < 1e-7
    return ok, (
        f"closed forms {closed:.1e}, conjugates {len(rep.conjugate_times)}, slopes off by {slope:.1e}, "
        f"flat {flat.verdict}, riccati {cons:.1e}"
    )


def crit_sphere_triviality():
    cert = sphere_certificate(backends()["round_sphere"])
    k1 = [s for s in cert.steps if s.k == 1][0]
    ok = cert.constant_only and k1.kernel_dim_numeric == 0 and cert.algebra_dimension == 1
    return ok, f"dim ker eta-|Omega_1 = {k1.kernel_dim_numeric}, invariant algebra dimension {cert.algebra_dimension}"


def crit_determinism():
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        for suite in SUITES:
            outs = []
            for run in ("a", "b"):
                cfg = RunConfig.from_mapping(suite, {"seed": 17})
                paths = write_result(run_suite(cfg), Path(tmp) / run, "csv")
                outs.append({p.name: p.read_bytes() for p in paths})
            if outs[0] != outs[1]:
                differing.append(suite)
    return not differing, f"{len(SUITES)} suites rerun, differing: {differing or 'none'}"


CRITERIA = [
    (1, "structure equations", crit_structure),
    (2, "Pestov identity", crit_pestov),
    (3, "kernel dimensions", crit_kernels),
    (4, "Flaminio reconstruction", crit_flaminio),
    (5, "stability sampling", crit_stability),
    (6, "trace/growth equivalence", crit_trace),
    (7, "algebra closure", crit_algebra),
    (8, "Dolbeault complex", crit_dolbeault),
    (9, "bundle obstructions", crit_bundle),
    (10, "cone dynamics", crit_cone),
    (11, "sphere triviality", crit_sphere_triviality),
    (12, "determinism", crit_determinism),
]


def report(num: int, name: str, func) -> tuple[bool, str]:
    ok, detail = func()
    return bool(ok), f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {name}: {detail}"


@pytest.mark.parametrize("num,name,func", CRITERIA, ids=[c[1].replace(" ", "_") for c in CRITERIA])
def test_criterion(num, name, func, capsys):
    ok, line = report(num, name, func)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    for num, name, func in CRITERIA:
        ok, line = report(num, name, func)
        failures += not ok
        print(line, flush=True)
    sys.exit(1 if failures else 0)
