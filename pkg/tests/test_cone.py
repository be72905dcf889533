from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtlab.cone import (
    CurvatureProfile,
    cone_summary,
    crossing_analysis,
    integrate_projective,
    riccati_consistency,
    riccati_limits,
    summary_json,
)
from gtlab.errors import ConfigParse, NoConvergence, UnresolvedCrossing, ZeroInitialCovector
from oracles import jacobi_closed_form


@pytest.mark.parametrize("K", [1.0, 0.0, -1.0, 4.0, -0.25])
@pytest.mark.parametrize("xi0", [(0.0, 1.0), (1.0, -1.0), (0.3, 2.0)])
def test_constant_curvature_closed_form(K, xi0):
    traj = integrate_projective(CurvatureProfile.constant(K), xi0, 10.0, normalized=False)
    x, y = jacobi_closed_form(K, traj.t, *xi0)
    scale = np.maximum(1.0, np.hypot(x, y))
    assert np.max(np.hypot(traj.x - x, traj.y - y) / scale) < 1e-8


def test_backward_integration_closed_form():
    traj = integrate_projective(CurvatureProfile.constant(1.0), (0.0, 1.0), -5.0, normalized=False)
    x, y = jacobi_closed_form(1.0, traj.t)
    assert np.max(np.abs(traj.x - x)) < 1e-9


@pytest.mark.parametrize("T", [3.0, 7.0, 10.0, 20.0])
def test_sphere_conjugate_count(T):
    rep = crossing_analysis(integrate_projective(CurvatureProfile.constant(1.0), (0.0, 1.0), T))
    n = math.floor(T / math.pi)
    assert len(rep.conjugate_times) == n
    assert np.allclose(rep.conjugate_times, math.pi * np.arange(1, n + 1), atol=1e-10)
    assert rep.crossings[0] == 0.0
    # the lifted line crosses transversally with alternating orientation
    assert all(abs(abs(d) - 1.0) < 1e-9 for d in rep.transversal)
    assert all(a * b < 0 for a, b in zip(rep.transversal, rep.transversal[1:]))


def test_scaled_sphere_conjugates():
    rep = crossing_analysis(integrate_projective(CurvatureProfile.constant(4.0), (0.0, 1.0), 10.0))
    assert len(rep.conjugate_times) == math.floor(10 * 2 / math.pi)


@pytest.mark.parametrize("K", [0.0, -1.0])
def test_no_conjugates_without_positive_curvature(K):
    rep = crossing_analysis(integrate_projective(CurvatureProfile.constant(K), (0.0, 1.0), 15.0))
    assert rep.conjugate_times == () and rep.winding == 0


def test_winding():
    rep = crossing_analysis(integrate_projective(CurvatureProfile.constant(1.0), (0.0, 1.0), 2 * math.pi + 0.1))
    assert rep.winding == 1 and rep.half_turns == 2


def test_zero_covector():
    with pytest.raises(ZeroInitialCovector):
        integrate_projective(CurvatureProfile.constant(1.0), (0.0, 0.0), 1.0)


def test_unresolved_crossing_on_coarse_sampling():
    traj = integrate_projective(CurvatureProfile.constant(100.0), (0.0, 1.0), 5.0, max_step=0.5)
    with pytest.raises(UnresolvedCrossing):
        crossing_analysis(traj)


def test_riccati_hyperbolic():
    lim = riccati_limits(CurvatureProfile.constant(-1.0))
    assert sorted([lim.r_u, lim.r_s]) == pytest.approx([-1.0, 1.0], abs=1e-6)
    assert lim.separated and lim.gap == pytest.approx(2.0, abs=1e-6)
    assert lim.verdict.startswith("separated")


def test_riccati_flat_collapses():
    lim = riccati_limits(CurvatureProfile.constant(0.0))
    assert not lim.separated and lim.verdict.startswith("collapsed")


def test_riccati_sphere_has_no_limit():
    with pytest.raises(NoConvergence):
        riccati_limits(CurvatureProfile.constant(1.0))


def test_riccati_variable_negative_curvature():
    lim = riccati_limits(CurvatureProfile.sine(-1.0, 0.5))
    assert lim.separated and lim.gap > 1.0
    assert sorted(lim.record()) == ["gap", "horizons", "r_s", "r_u", "verdict"]


@pytest.mark.parametrize(
    "profile",
    [
        CurvatureProfile.constant(-1.0),
        CurvatureProfile.constant(0.5),
        CurvatureProfile.sine(-1.0, 0.5, 2.0, 0.3),
        CurvatureProfile.table([0.0, 3.0, 6.0, 10.0], [-1.0, 0.5, -2.0, 0.0]),
    ],
)
def test_riccati_consistency(profile):
    traj = integrate_projective(profile, (0.3, 1.0), 10.0)
    assert riccati_consistency(traj) < 1e-7


def test_profile_parsing():
    p = CurvatureProfile.from_mapping({"type": "sin", "base": -1, "amplitude": 0.5, "frequency": 2})
    assert p(0.0) == pytest.approx(-1.0) and p.label().startswith("K=-1+0.5sin")
    t = CurvatureProfile.from_mapping({"type": "table", "t": [0, 1], "K": [0, 2]})
    assert t(0.5) == pytest.approx(1.0)
    for bad in ({"type": "cosh"}, {"type": "constant"}, {"type": "table", "t": [1, 0], "K": [0, 0]}):
        with pytest.raises(ConfigParse):
            CurvatureProfile.from_mapping(bad)


def test_summary_deterministic():
    rec = cone_summary(CurvatureProfile.constant(1.0), (0.0, 1.0), 7.0)
    assert summary_json(rec) == summary_json(cone_summary(CurvatureProfile.constant(1.0), (0.0, 1.0), 7.0))
    assert len(rec["conjugate_times"]) == 2


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-math.pi, math.pi))
def test_projective_chart_preserves_direction(K, angle):
    xi = (math.cos(angle), math.sin(angle))
    a = integrate_projective(CurvatureProfile.constant(K), xi, 4.0, normalized=False)
    b = integrate_projective(CurvatureProfile.constant(K), (3 * xi[0], 3 * xi[1]), 4.0, normalized=False)
    assert np.allclose(3 * a.x, b.x, atol=1e-9) and np.allclose(3 * a.y, b.y, atol=1e-9)
