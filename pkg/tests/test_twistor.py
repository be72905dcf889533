from __future__ import annotations

import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtlab.errors import (
    BandLimitExceeded,
    InvalidBidegree,
    NegativeModesBelowMinusOne,
    NegativeModesPresent,
    PsiVanishes,
    RadiusOutOfRange,
    UnsupportedSurface,
)
from gtlab.geometry import flat_torus
from gtlab.modes import ModeSection, ModeStack, synthesize
from gtlab.twistor import (
    CoefficientField,
    DolbeaultTuple,
    TwistorSeries,
    apply_p,
    bundle_obstruction,
    dbar_omega,
    dbar_omega_solve,
    dolbeault_D,
    extend,
    gauge_residual,
    gauge_term,
    holomorphy_residual,
    is_holomorphic,
    mode_cn_norms,
    planted_mode_growth,
    planted_radial_growth,
    product,
    series_field,
    sm_cn_norm,
    torus_series,
    trace,
    trace_and_growth,
    unit,
    write_records,
)


@pytest.fixture(scope="module")
def tiny():
    return flat_torus(4)


def test_extend_trace_round_trip(flat, rng):
    u = ModeStack.random(flat, 0, 6, 3, rng)
    back = trace(extend(u))
    assert back.kmin == 0 and np.array_equal(back.data, u.data)


def test_extend_rejects_negative_modes(flat, rng):
    with pytest.raises(NegativeModesPresent):
        extend(ModeStack.random(flat, -1, 2, 2, rng))
    z = ModeStack.random(flat, -1, 2, 2, rng).map_data(lambda d: np.concatenate([0 * d[:1], d[1:]]))
    assert extend(z).m == 0


def test_at_radius_matches_power_series(tiny):
    h = torus_series(tiny, [1.0, 2.0, 3.0])
    r = 0.5
    vals = synthesize(h.at_radius(r), 8)
    th = 2 * np.pi * np.arange(8) / 8
    expect = 1 + 2 * r * np.exp(1j * th) + 3 * r * r * np.exp(2j * th)
    assert np.abs(vals[0, 0] - expect).max() < 1e-14


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_planted_mode_growth(tiny, p):
    rep = trace_and_growth(torus_series(tiny, planted_mode_growth(p, 2**15)))
    assert rep.p_modes == pytest.approx(p, abs=1e-3)
    assert p - 0.5 <= rep.p_radial <= p + 1.5
    assert rep.verdict


@pytest.mark.parametrize("q", [0, 1, 2, 3])
def test_planted_radial_growth(tiny, q):
    rep = trace_and_growth(torus_series(tiny, planted_radial_growth(q, 2**15)))
    assert rep.p_radial == pytest.approx(q, abs=0.05)
    assert q - 1.5 <= rep.p_modes <= q + 0.5
    assert rep.verdict


def test_first_order_growth(tiny):
    rep = trace_and_growth(torus_series(tiny, planted_mode_growth(1, 2**12)), order=1)
    assert rep.verdict and rep.p_modes >= 1.0


def test_cn_norms_on_sphere(small_sphere, rng):
    u = ModeStack.random(small_sphere, 0, 3, 3, rng)
    n0, n1 = mode_cn_norms(u, 0), mode_cn_norms(u, 1)
    assert np.all(n1 >= n0)
    assert sm_cn_norm(u, 1, 16) >= sm_cn_norm(u, 0, 16)


def test_radius_errors(tiny):
    h = torus_series(tiny, [1.0, 1.0, 1.0])
    with pytest.raises(RadiusOutOfRange):
        trace_and_growth(h, radii=(0.5, 1.0))
    with pytest.raises(RadiusOutOfRange):
        trace_and_growth(h, radii=(0.5, 0.4, 0.9))


def test_torus_series_holomorphic(flat):
    h = torus_series(flat, np.arange(1.0, 18.0))
    assert is_holomorphic(h)
    assert max(holomorphy_residual(h).values()) == 0.0


def test_non_holomorphic_detected(flat, rng):
    h = TwistorSeries(0, ModeStack.random(flat, 0, 3, 2, rng))
    assert not is_holomorphic(h)


def test_product_laws(flat, rng):
    def draw():
        return torus_series(flat, rng.standard_normal(9) + 1j * rng.standard_normal(9))

    a, b, c = draw(), draw(), draw()
    ab = product(a, b)
    assert is_holomorphic(ab)
    lhs, rhs = product(ab, c), product(a, product(b, c))
    assert (lhs.modes - rhs.modes).norm() < 1e-12 * lhs.modes.norm()
    one = product(unit(flat), a)
    assert np.array_equal(one.modes.data, a.modes.data)


def test_product_of_deltas(flat):
    d = torus_series(flat, [0.0, 1.0])
    sq = product(d, d)
    assert sq.kmax == 2 and sq.modes.coef(2)[0, 0] == pytest.approx(1.0)
    assert np.abs(sq.modes.data[:2]).max() < 1e-15


def test_product_truncation_records_tail(flat):
    a = torus_series(flat, [1.0, 1.0, 1.0])
    p = product(a, a, kmax=2)
    assert p.kmax == 2 and p.modes.discarded_tail == pytest.approx(2.0**2 + 1.0, rel=1e-12)


def test_product_alias_guard(flat, rng):
    hi = TwistorSeries(0, ModeStack.random(flat, 0, 1, 10, rng))
    with pytest.raises(BandLimitExceeded):
        product(hi, hi)


def test_sphere_product_band_guard(small_sphere, rng):
    h = TwistorSeries(0, ModeStack.random(small_sphere, 0, 5, 2, rng))
    with pytest.raises(BandLimitExceeded):
        product(h, h)


def test_holomorphy_matches_p_on_series(flat, rng):
    h = TwistorSeries(0, ModeStack.random(flat, 0, 4, 3, rng))
    pf = apply_p(series_field(h))
    res = holomorphy_residual(h)
    # column a of P h has weight -1, so degree a - 1, and holds eta_+ u_{a-2} + eta_- u_a
    for k, r in res.items():
        assert flat.norm(pf.data[k, 0], k - 1) == pytest.approx(r, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("p", [0, 1, 2])
def test_d_squared_vanishes(backend, rng, p):
    band = 8 if backend.kind.value != "round_sphere" else 6
    t = DolbeaultTuple.random(backend, p, 0, 4, 4, band, rng)
    dd = dolbeault_D(dolbeault_D(t))
    assert dd.q == 2
    assert dd.norm() < 1e-12 * t.norm()


def test_invalid_bidegree(flat, rng):
    with pytest.raises(InvalidBidegree):
        dolbeault_D(DolbeaultTuple.random(flat, 0, 2, 1, 1, 1, rng))
    with pytest.raises(InvalidBidegree):
        DolbeaultTuple(3, 0, ())


def test_dbar_solver(flat, rng):
    f = CoefficientField.random(flat, 0, 4, 4, 8, rng)
    back = dbar_omega(dbar_omega_solve(f))
    assert back.m == f.m and (back - f).norm() < 1e-14 * f.norm()


def test_dolbeault_records_deterministic(flat, rng):
    t = DolbeaultTuple.random(flat, 1, 0, 1, 1, 2, rng)
    a, b = io.StringIO(), io.StringIO()
    write_records(t.records(), a)
    write_records(t.records(), b)
    assert a.getvalue() == b.getvalue()
    rec = json.loads(a.getvalue().splitlines()[0])
    assert {"k", "basis_id", "shape", "coefficients", "p", "q", "slot"} <= set(rec)


def test_gauge_example(flat):
    x1, _ = flat.grid_points
    psi = ModeSection.from_grid(flat, np.exp(2j * np.pi * x1), 0)
    psi_inv = ModeSection.from_grid(flat, np.exp(-2j * np.pi * x1), 0)
    a = gauge_term(psi)
    assert gauge_residual(a, psi_inv) < 1e-12
    # read literally (same psi on both sides) the residual is 2 ||a||
    assert gauge_residual(a, psi) == pytest.approx(2 * a.norm(), rel=1e-12)
    obs = bundle_obstruction(a)
    assert abs(obs.integral) < 1e-12 and obs.integral_vanishes
    assert obs.period == pytest.approx(np.pi * 1j, abs=1e-12)
    assert obs.period_vanishes and not obs.flagged


def test_obstruction_flags_mean(flat):
    a = ModeStack.from_sections(flat, {0: ModeSection.constant(flat, 0.3)})
    obs = bundle_obstruction(a)
    assert obs.flagged and obs.integral == pytest.approx(0.3)


def test_obstruction_errors(flat, small_sphere, rng):
    with pytest.raises(NegativeModesBelowMinusOne):
        bundle_obstruction(ModeStack.random(flat, -2, 0, 2, rng))
    with pytest.raises(UnsupportedSurface):
        bundle_obstruction(ModeStack.zeros(small_sphere, -1, 0))
    with pytest.raises(PsiVanishes):
        gauge_term(ModeSection.constant(flat, 0.0))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=6),
       st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_product_is_cauchy_product(c1, c2):
    t = flat_torus(4)
    p = product(torus_series(t, c1), torus_series(t, c2))
    expect = np.convolve(np.asarray(c1, complex), np.asarray(c2, complex))
    assert np.allclose(p.modes.data[:, 0, 0], expect, atol=1e-12)
