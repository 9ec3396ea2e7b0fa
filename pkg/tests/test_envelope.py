import math

import pytest
from hypothesis import given, strategies as st

from multimat.envelope import (
    EnvelopeError,
    envelope_eval,
    envelope_oracle,
    gamma_interval,
    strain_curve,
    structure_for_fractions,
    thresholds,
)


@st.composite
def configs(draw):
    k1 = draw(st.floats(0.2, 5.0))
    k2 = k1 * draw(st.floats(1.1, 20.0))
    ga, gb = gamma_interval(k1, k2)
    g = ga + (gb - ga) * draw(st.floats(0.01, 0.99))
    return k1, k2, g


def test_thresholds_frozen():
    r = thresholds(1.0, 2.0, 0.6)
    assert r[0] == pytest.approx(0.6, abs=1e-15)
    assert r[1] == pytest.approx(0.7302967433402214, abs=1e-15)
    assert r[2] == pytest.approx(1.0954451150103324, abs=1e-15)


def test_gamma_interval():
    assert gamma_interval(1.0, 2.0) == (0.5, pytest.approx(2.0 / 3.0))
    with pytest.raises(EnvelopeError):
        gamma_interval(2.0, 1.0)


@pytest.mark.parametrize("s,regime,m,value,strain", [
    (0.3, "U1", (0.15, 0.25, 0.6), 0.54, 1.6),
    (0.65, "U2", (0.0, 1.0, 0.0), 1.0225, 1.3),
    (0.9, "U3", (0.46475150877324767, 0.5352484912267523, 0.0), 1.3668012070185982, 1.2908902300206648),
    (1.2, "U4", (1.0, 0.0, 0.0), 1.72, 1.2),
])
def test_envelope_frozen(s, regime, m, value, strain):
    p = envelope_eval(s, 1.0, 2.0, 0.6)
    assert p.regime == regime
    assert p.m == pytest.approx(m, abs=1e-14)
    assert p.value == pytest.approx(value, abs=1e-14)
    assert p.strain == pytest.approx(strain, abs=1e-14)


def test_structures_by_regime():
    labels = [envelope_eval(s, 1.0, 2.0, 0.6).structure for s in (0.0, 0.3, 0.65, 0.9, 1.2)]
    assert labels == ["void", "L(13,2,13)", "k2", "L(12,1)", "k1"]
    assert envelope_eval(0.3, 1.0, 2.0, 0.6).kappa_eff == pytest.approx(16.0 / 3.0, rel=1e-14)


def test_errors():
    with pytest.raises(EnvelopeError):
        envelope_eval(-0.1, 1.0, 2.0, 0.6)
    with pytest.raises(EnvelopeError):
        thresholds(1.0, 2.0, 1.5)
    with pytest.raises(EnvelopeError):
        strain_curve([0.5, 0.2], 1.0, 2.0, 0.6)


def test_degenerate_gamma():
    p = envelope_eval(0.3, 1.0, 2.0, 0.9, grid_n=200)
    assert p.regime == "degenerate"
    assert p.m[1] == pytest.approx(0.0, abs=1e-9)
    assert p.structure == "HS(13)"
    # the intermediate phase is unused, so this is the two-phase envelope
    assert p.value == pytest.approx(envelope_oracle(0.3, 1.0, 2.0, 0.9, grid_n=200)[0], abs=1e-12)


def test_structure_for_fractions():
    assert structure_for_fractions(1.0, 0.0) == "k1"
    assert structure_for_fractions(0.0, 0.0) == "void"
    assert structure_for_fractions(0.5, 0.5) == "L(12,1)"
    assert structure_for_fractions(0.2, 0.2) == "L(13,2,13)"


@given(configs(), st.floats(0.0, 3.0))
def test_below_pure_phases(cfg, s):
    k1, k2, g = cfg
    v = envelope_eval(s, k1, k2, g).value
    assert v <= 0.5 * k1 * s * s + 1.0 + 1e-12
    assert v <= 0.5 * k2 * s * s + g + 1e-12
    assert v >= 0.0


@given(configs(), st.floats(0.01, 3.0))
def test_strain_is_derivative(cfg, s):
    k1, k2, g = cfg
    r = thresholds(k1, k2, g)
    h = 1e-6
    if any(abs(s - x) < 2 * h for x in r):
        return
    fd = (envelope_eval(s + h, k1, k2, g).value - envelope_eval(s - h, k1, k2, g).value) / (2 * h)
    assert envelope_eval(s, k1, k2, g).strain == pytest.approx(fd, rel=1e-6, abs=1e-6)


@given(configs())
def test_continuity_at_thresholds(cfg):
    k1, k2, g = cfg
    for r in thresholds(k1, k2, g):
        lo = envelope_eval(r, k1, k2, g)
        hi = envelope_eval(math.nextafter(r, math.inf), k1, k2, g)
        assert abs(lo.value - hi.value) < 1e-12 * max(1.0, lo.value)
        assert abs(lo.strain - hi.strain) < 1e-9 * max(1.0, lo.strain)


@given(configs(), st.floats(0.0, 2.0))
def test_fractions_on_simplex(cfg, s):
    m = envelope_eval(s, *cfg).m
    assert all(-1e-12 <= x <= 1 + 1e-12 for x in m)
    assert sum(m) == pytest.approx(1.0, abs=1e-12)


@given(configs(), st.floats(0.0, 2.0))
def test_matches_oracle(cfg, s):
    k1, k2, g = cfg
    ref = envelope_oracle(s, k1, k2, g, grid_n=120)[0]
    assert envelope_eval(s, k1, k2, g).value == pytest.approx(ref, abs=1e-7)


def test_strain_curve_sorted():
    out = strain_curve([0.1, 0.5, 1.0], 1.0, 2.0, 0.6)
    assert [s for s, _ in out] == [0.1, 0.5, 1.0]
