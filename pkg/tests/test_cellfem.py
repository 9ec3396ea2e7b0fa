import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multimat.bounds import PhaseSet, hs_bound
from multimat.cellfem import (
    CellError,
    CellGrid,
    attainability_report,
    homogenize,
    isotropic_compliance,
    layer_frame_compliance,
    load_pgm,
    rasterize,
    rasterize_coated_circles,
    rasterize_laminate,
    save_pgm,
)
from multimat.laminate import Lam, Leaf

INF = math.inf


def test_uniform_cell():
    g = CellGrid(np.zeros((8, 8), dtype=int), (2.0,))
    K = homogenize(g).compliance
    assert np.allclose(K, 2.0 * np.eye(3), atol=1e-12)


def test_layered_cell_exact():
    g = rasterize_laminate(Lam(Leaf(0), Leaf(1), 0.5, 0.0), (1.0, 3.0), 16)
    assert np.array_equal(g.cells[0, :8], np.zeros(8))  # angle 0: normal along x, columns
    K = homogenize(g).compliance
    assert np.allclose(K, np.diag([2.0, 1.5, 2.0]), atol=1e-10)
    nn, nt, tt = layer_frame_compliance(homogenize(g), 0.0)
    assert (nn, tt, nt) == pytest.approx((2.0, 1.5, 2.0), abs=1e-10)


def test_layers_normal_to_y():
    g = rasterize_laminate(Lam(Leaf(0), Leaf(1), 0.5, math.pi / 2), (1.0, 3.0), 16)
    K = homogenize(g).compliance
    assert np.allclose(K, np.diag([1.5, 2.0, 2.0]), atol=1e-10)


def test_cg_matches_direct():
    g = rasterize_coated_circles(1, 0, 0.4, 24, (1.0, 2.0), levels=1)
    a = homogenize(g).compliance
    b = homogenize(g, solver="cg", rtol=1e-12).compliance
    assert np.allclose(a, b, rtol=1e-7)


def test_second_rank_laminate_near_hs():
    node = Lam(Lam(Leaf(0), Leaf(1), 0.5, math.pi / 2), Leaf(0), 0.5, 0.0)
    g = rasterize_laminate(node, (1.0, 2.0), 64)
    m = g.fractions()
    assert m == pytest.approx([0.75, 0.25])
    fem = isotropic_compliance(homogenize(g))
    hs = hs_bound(PhaseSet.from_lists([1.0, 2.0], list(m)))
    assert hs <= fem * (1 + 1e-12)


@given(seed=st.integers(0, 2), n=st.sampled_from([8, 12, 16]))
@settings(max_examples=15)
def test_pgm_roundtrip(tmp_path_factory, seed, n):
    rng = np.random.default_rng(seed)
    g = CellGrid(rng.integers(0, 3, size=(n, n + 4)), (1.0, 2.0, INF))
    p = tmp_path_factory.mktemp("pgm") / "cell.pgm"
    save_pgm(g, p)
    back = load_pgm(p, g.kappas)
    assert np.array_equal(back.cells, g.cells)
    save_pgm(back, p.with_suffix(".2.pgm"))
    assert p.read_bytes() == p.with_suffix(".2.pgm").read_bytes()


def test_pgm_header_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n8 8\n255\n" + bytes([128]) * 64)
    assert np.all(load_pgm(p, (1.0, 2.0)).cells == 1)
    p.write_bytes(b"P5\n8 8\n255\n" + bytes([7]) * 64)
    with pytest.raises(CellError):
        load_pgm(p, (1.0, 2.0))


def test_grid_validation():
    with pytest.raises(CellError):
        CellGrid(np.zeros((4, 4), dtype=int), (1.0,))
    with pytest.raises(CellError):
        CellGrid(np.full((8, 8), 2), (1.0, 2.0))
    with pytest.raises(CellError):
        CellGrid(np.zeros((8, 8), dtype=int), (INF,)).stiffness_values()
    with pytest.raises(CellError):
        rasterize_laminate(Lam(Leaf(0), Leaf(1), 0.5, 0.3), (1.0, 2.0), 16)
    with pytest.raises(CellError):
        rasterize("hexagons", 16)


def test_coated_circle_fraction():
    g = rasterize_coated_circles(2, 0, 0.5, 128, (1.0, 2.0, INF))
    assert g.fractions()[2] == pytest.approx(0.5, abs=2.0 / 128)
    with pytest.raises(CellError):
        rasterize_coated_circles(2, 0, 0.95, 64, (1.0, 2.0, INF))


def test_void_cell_soft_but_finite():
    g = rasterize_coated_circles(1, 0, 0.3, 32, (1.0, INF), levels=1)
    k = isotropic_compliance(homogenize(g))
    bound = hs_bound(PhaseSet.from_lists([1.0, INF], list(g.fractions())))
    assert k >= bound


@pytest.mark.slow
def test_attainability_report():
    rows = {r["structure"]: r for r in attainability_report({"n": 128})}
    for name in ("k1", "HS(13)", "L(12,1)"):
        assert rows[name]["gap_bound_catalog"] < 1e-4
        assert rows[name]["gap_bound_fem"] < 0.03
    # a lone coated disk is not the space-filling assemblage
    assert rows["HS(13) single disk"]["fem"] > rows["HS(13)"]["fem"]
