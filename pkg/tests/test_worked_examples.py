"""Small hand-checkable cases for each public operation."""

import math

import numpy as np
import pytest

from multimat.bounds import (
    Phase,
    PhaseSet,
    SupportSet,
    compatibility_check,
    hs_bound,
    mean_field_check,
    modified_translation_bound,
    multiwell_lagrangian,
    three_material_bound,
    three_material_thresholds,
    translated_well,
    well_energy,
    wiener_bound,
)
from multimat.cellfem import rasterize_coated_circles, rasterize_laminate
from multimat.envelope import envelope_eval, envelope_oracle, gamma_interval, thresholds
from multimat.laminate import Lam, Leaf, evaluate_structure, optimize_at_fractions, regime_map
from multimat.tensor import StressTensor, eigen, invariants, rank_one_gap

INF = math.inf
I = StressTensor.isotropic(1.0)


@pytest.mark.parametrize("s, want", [
    (I, (2.0, 1.0, 2.0)),
    (StressTensor.diag(2.0, 0.5), (2.5, 1.0, 4.25)),
    (StressTensor(1.0, 1.0, 1.0), (2.0, 0.0, 4.0)),
])
def test_invariants(s, want):
    assert invariants(s) == pytest.approx(want, abs=1e-15)


def test_eigen_pure_shear():
    lam1, lam2, angle = eigen(StressTensor(0.0, 0.0, 1.0))
    assert (lam1, lam2) == pytest.approx((-1.0, 1.0), abs=1e-15)
    assert angle == pytest.approx(math.pi / 4, abs=1e-14)


def test_eigen_diagonal():
    assert eigen(StressTensor.diag(3.0, 1.0)) == pytest.approx((1.0, 3.0, 0.0), abs=1e-15)
    lam1, lam2, angle = eigen(StressTensor.isotropic(0.7))
    assert (lam1, lam2) == (0.7, 0.7) and math.isfinite(angle)


def test_rank_one_gap():
    assert rank_one_gap(I, I) == 0.0
    assert rank_one_gap(I, StressTensor.diag(0.0, 1.0)) == 0.0
    assert rank_one_gap(StressTensor.diag(2.0, 1.0), StressTensor.diag(1.0, 2.0)) == -1.0


def test_well_energy_diagonal():
    assert well_energy(Phase(2.0), StressTensor.diag(1.0, 0.0)) == 1.0


def test_multiwell_switches_wells():
    ps = PhaseSet([Phase(1.0, 1.0), Phase(2.0, 0.6), Phase(INF, 0.0)])
    v, i = multiwell_lagrangian(ps, StressTensor.isotropic(0.3))
    assert (v, i) == (pytest.approx(0.78, abs=1e-15), 1)
    v, i = multiwell_lagrangian(ps, StressTensor.isotropic(3.0))
    assert (v, i) == (pytest.approx(10.0, abs=1e-14), 0)


def test_wiener_values():
    assert wiener_bound(PhaseSet.from_lists([2.0], [1.0])) == 2.0
    assert wiener_bound(PhaseSet.from_lists([1.0, 2.0], [0.5, 0.5])) == pytest.approx(4 / 3, rel=1e-15)
    assert wiener_bound(PhaseSet.from_lists([1.0, INF], [0.5, 0.5])) == 2.0


def test_hs_values():
    assert hs_bound(PhaseSet.from_lists([1.0, 2.0, INF], [1.0, 0.0, 0.0])) == pytest.approx(1.0, rel=1e-15)
    assert hs_bound(PhaseSet.from_lists([1.0, 2.0, INF], [0.2, 0.3, 0.5])) == pytest.approx(4.0, rel=1e-14)


def test_threshold_values():
    assert three_material_thresholds(1.0, 2.0, 0.25) == pytest.approx((1 / 6, 1 / 8), rel=1e-14)
    assert three_material_thresholds(1.0, 2.0, 0.0) == (0.0, 0.0)
    assert three_material_thresholds(1.0, 2.0, 1.0) == (0.0, 0.0)


def test_branches_meet_at_thresholds():
    assert three_material_bound(1.0, 2.0, 1 / 6, 0.25)[0] == pytest.approx(5.0, rel=1e-13)
    assert three_material_bound(1.0, 2.0, 1 / 6 - 1e-12, 0.25)[0] == pytest.approx(5.0, rel=1e-10)
    assert three_material_bound(1.0, 2.0, 1 / 8, 0.25)[0] == pytest.approx(6.0, rel=1e-13)
    assert three_material_bound(1.0, 2.0, 1 / 8 - 1e-12, 0.25)[0] == pytest.approx(6.0, rel=1e-10)


def test_two_material_limit_and_monotonicity():
    m1 = np.linspace(0.02, 1.0, 50)
    vals = [three_material_bound(1.0, 2.0, x, 0.0)[0] for x in m1]
    assert vals == pytest.approx(list((2.0 - m1) / m1), rel=1e-13)
    for m2 in (0.1, 0.3):
        v = [three_material_bound(1.0, 2.0, x, m2)[0] for x in np.linspace(0.01, 1 - m2, 80)]
        assert all(b <= a + 1e-12 for a, b in zip(v, v[1:]))


def test_translated_well_values():
    assert translated_well(Phase(1.0), StressTensor.diag(2.0, 0.0), 0.0) == 2.0
    assert translated_well(Phase(3.0), StressTensor.diag(1.0, -1.0), 0.4) == INF
    # this implementation adds t det, see the bound's sign convention
    assert translated_well(Phase(1.0), I, 0.5) == 1.5


def test_compatibility_examples():
    zero = StressTensor(0.0, 0.0, 0.0)
    assert compatibility_check(zero, SupportSet([StressTensor.diag(1.0, 0.0)]))
    assert not compatibility_check(zero, SupportSet([StressTensor.diag(2.0, 1.0), StressTensor.diag(1.0, 2.0)]))
    hull = SupportSet([StressTensor.isotropic(2.0), StressTensor.isotropic(0.5)])
    assert compatibility_check(StressTensor.isotropic(1.0), hull)
    assert not compatibility_check(StressTensor.isotropic(2.5), hull)


def test_mean_field_examples():
    assert mean_field_check(I, I)
    assert mean_field_check(StressTensor.diag(2.0, 0.5), I)
    assert not mean_field_check(StressTensor.isotropic(2.0), I)


def test_translation_bound_single_phase():
    s0 = StressTensor(0.8, 0.5, 0.1)
    res = modified_translation_bound(PhaseSet.from_lists([1.5], [1.0]), s0)
    assert res.value == pytest.approx(0.5 * 1.5 * s0.frob2, rel=1e-8)


def test_translation_bound_two_phases_is_hs():
    ps = PhaseSet.from_lists([1.0, 2.0], [0.5, 0.5])
    s = 0.6
    res = modified_translation_bound(ps, StressTensor.isotropic(s))
    assert hs_bound(ps) == pytest.approx(1.4, rel=1e-14)
    assert res.value == pytest.approx(0.5 * 1.4 * 2 * s * s, rel=1e-6)


def test_gamma_interval_values():
    assert gamma_interval(1.0, 2.0) == pytest.approx((0.5, 2 / 3), rel=1e-15)
    assert gamma_interval(1.0, 3.0) == pytest.approx((1 / 3, 0.5), rel=1e-15)
    a, b = gamma_interval(1.0, 1.0 + 1e-9)
    assert a == pytest.approx(1.0, abs=1e-8) and b == pytest.approx(1.0, abs=1e-8)


def test_thresholds_collapse_at_upper_cost():
    r1, r2, r3 = thresholds(1.0, 2.0, 2 / 3)
    assert r1 == pytest.approx(r2, rel=1e-14)
    assert r2 < r3


def test_envelope_pure_intermediate_regime():
    p = envelope_eval(0.7, 1.0, 2.0, 0.6)
    assert p.regime == "U2"
    assert p.value == pytest.approx(1.09, abs=1e-14)
    assert p.m == (0.0, 1.0, 0.0)


def test_oracle_at_zero_load():
    v, m1, m2 = envelope_oracle(0.0, 1.0, 2.0, 0.6, grid_n=100)
    assert v == 0.0 and (m1, m2) == (0.0, 0.0)


def test_void_laminate_uniaxial_along_layers():
    ps = PhaseSet.from_lists([1.0, 2.0, INF])
    f = 0.4
    # layers normal to x carry tension along y
    e, _ = evaluate_structure(Lam(Leaf(0), Leaf(2), f, 0.0), ps, StressTensor.diag(0.0, 0.5))
    assert e == pytest.approx(0.5 * (1.0 / f) * 0.25, rel=1e-12)


def test_second_rank_laminate_reaches_hs():
    ps = PhaseSet.from_lists([1.0, 2.0], [0.5, 0.5])
    s = 0.9
    val = optimize_at_fractions("L(12,1)", ps, StressTensor.isotropic(s), (0.5, 0.5)).value
    assert val == pytest.approx(0.5 * hs_bound(ps) * 2 * s * s, abs=1e-9)


def test_anisotropic_regime_sequence():
    ps = PhaseSet.from_lists([1.0, 2.0, INF])
    lam1 = np.linspace(0.05, 1.6, 24)
    labels = list(regime_map(ps, 0.6, lam1, [0.05])[:, 0])
    bands = [x for i, x in enumerate(labels) if i == 0 or labels[i - 1] != x]
    assert bands == ["L(13,2,13)", "L(13,2)", "L(13,2,1)", "k1"]


def test_rasterized_layers_split_evenly():
    grid = rasterize_laminate(Lam(Leaf(0), Leaf(1), 0.5, 0.0), (1.0, 2.0), 64)
    cols = grid.cells[0]
    assert np.all(grid.cells == cols[None, :])
    assert np.count_nonzero(cols == 0) == 32 and np.count_nonzero(cols == 1) == 32


def test_coated_circle_core_fraction():
    grid = rasterize_coated_circles(0, 1, 0.25, 128, (1.0, 2.0))
    assert abs(grid.fractions()[0] - 0.25) <= 2 / 128
