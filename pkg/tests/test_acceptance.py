"""Acceptance criteria, one PASS/FAIL line each (shown in the pytest terminal summary)."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from multimat.bounds import (
    PhaseSet,
    _branch_values,
    hs_bound,
    modified_translation_bound,
    three_material_bound,
    three_material_thresholds,
    wiener_bound,
)
from multimat.cli import run
from multimat.envelope import envelope_eval, envelope_oracle, gamma_interval, thresholds
from multimat.laminate import optimize_at_fractions, regime_map
from multimat.tensor import StressTensor
from multimat.cellfem import attainability_report
from multimat.topopt import DesignProblem, baselines, mirror_problem, solve_design

INF = math.inf
ISO = StressTensor.isotropic(1.0)


def report(cid, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} C{cid} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_configs(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k1 = rng.uniform(0.2, 5.0)
        k2 = k1 * rng.uniform(1.1, 20.0)
        ga, gb = gamma_interval(k1, k2)
        out.append((k1, k2, rng.uniform(ga, gb)))
    return out


def test_c01_envelope_continuity():
    t0 = time.perf_counter()
    worst = 0.0
    for k1, k2, g in random_configs(100, 1):
        for r in thresholds(k1, k2, g):
            a = envelope_eval(r, k1, k2, g).value
            b = envelope_eval(math.nextafter(r, INF), k1, k2, g).value
            worst = max(worst, abs(a - b))
    dt = time.perf_counter() - t0
    report(1, "envelope continuity", worst < 1e-12 and dt < 1.0,
           f"max jump {worst:.2e} (tol 1e-12), {dt:.3f} s (limit 1 s)")


def test_c02_envelope_vs_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for k1, k2, g in random_configs(50, 2):
        s_max = 1.3 * thresholds(k1, k2, g)[2]
        for s in np.linspace(0.0, s_max, 20):
            ref = envelope_oracle(float(s), k1, k2, g, grid_n=200)[0]
            worst = max(worst, abs(envelope_eval(float(s), k1, k2, g).value - ref))
    dt = time.perf_counter() - t0
    report(2, "envelope vs brute-force oracle", worst < 1e-6 and dt < 120.0,
           f"max |diff| {worst:.2e} over 1000 points (tol 1e-6), {dt:.1f} s (limit 120 s)")


def test_c03_boundary_identities():
    worst = 0.0
    for k1, k2, g in random_configs(100, 3):
        r1, r2, r3 = thresholds(k1, k2, g)
        worst = max(worst,
                    abs(envelope_eval(r1, k1, k2, g).m[1] - 1.0),
                    abs(envelope_eval(math.nextafter(r2, INF), k1, k2, g).m[0]),
                    abs(envelope_eval(r3, k1, k2, g).m[0] - 1.0))
    report(3, "boundary identities", worst < 1e-12, f"max deviation {worst:.2e} (tol 1e-12)")


def test_c04_strain_facts():
    worst = 0.0
    signs_ok = True
    for k1, k2, g in random_configs(100, 4):
        worst = max(worst, abs(envelope_eval(1e-14, k1, k2, g).strain - 2.0 * math.sqrt(k1)))
        r = (0.0,) + thresholds(k1, k2, g) + (2.0 * thresholds(k1, k2, g)[2],)
        for i, want in enumerate((-1, 1, -1, 1)):
            a, b = r[i], r[i + 1]
            s1, s2 = a + 0.3 * (b - a), a + 0.7 * (b - a)
            slope = (envelope_eval(s2, k1, k2, g).strain - envelope_eval(s1, k1, k2, g).strain) / (s2 - s1)
            signs_ok &= np.sign(slope) == want
    report(4, "strain facts", worst < 1e-9 and signs_ok,
           f"|eps(0+) - 2 sqrt(k1)| max {worst:.2e} (tol 1e-9); slope signs U1-,U2+,U3-,U4+ "
           f"{'hold' if signs_ok else 'violated'}")


def test_c05_bound_chain():
    ps = PhaseSet.from_lists([1.0, 2.0, INF], [0.05, 0.3, 0.65])
    b, branch = three_material_bound(1.0, 2.0, 0.05, 0.3)
    h = hs_bound(ps)
    ok = abs(b - 8.0) < 1e-12 and abs(h - 7.0) < 1e-12 and branch == 3
    bad = 0
    grid = np.linspace(0.0, 1.0, 52)[1:-1]
    for m1 in grid:
        for m2 in grid:
            if m1 + m2 >= 1.0:
                continue
            p = PhaseSet.from_lists([1.0, 2.0, INF], [m1, m2, 1.0 - m1 - m2])
            w, hh, bb = wiener_bound(p), hs_bound(p), three_material_bound(1.0, 2.0, m1, m2)[0]
            bad += not (w <= hh * (1 + 1e-12) and hh <= bb * (1 + 1e-12))
    report(5, "bound chain", ok and bad == 0,
           f"branch-3 {b!r} vs 8.0, HS {h!r} vs 7.0; wiener <= hs <= b2 violations {bad}")


def test_c06_branch_continuity():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        k1 = rng.uniform(0.2, 5.0)
        k2 = k1 * rng.uniform(1.1, 20.0)
        m2 = rng.uniform(0.01, 0.99)
        m11, m12 = three_material_thresholds(k1, k2, m2)
        b1, b2, _ = _branch_values(k1, k2, m11, m2)
        _, c2, c3 = _branch_values(k1, k2, m12, m2)
        worst = max(worst, abs(b1 - b2) / abs(b1), abs(c2 - c3) / abs(c2))
    report(6, "branch continuity", worst < 1e-12, f"max relative jump {worst:.2e} (tol 1e-12)")


def test_c07_modified_translation():
    pts = [(0.05, 0.3), (0.1, 0.1), (0.02, 0.5), (0.14, 0.3), (0.12, 0.5), (0.125, 0.1),
           (0.3, 0.2), (0.6, 0.1), (0.4, 0.5), (0.15, 0.8)]
    t0 = time.perf_counter()
    worst, branches = 0.0, set()
    for m1, m2 in pts:
        ps = PhaseSet.from_lists([1.0, 2.0, INF], [m1, m2, 1.0 - m1 - m2])
        b, br = three_material_bound(1.0, 2.0, m1, m2)
        branches.add(br)
        tb = modified_translation_bound(ps, ISO)
        worst = max(worst, abs(tb.value - b) / b)  # energy at sigma0 = I equals the compliance
    dt = time.perf_counter() - t0
    report(7, "modified translation bound", worst < 0.01 and branches == {1, 2, 3} and dt < 300,
           f"max relative gap {worst:.2e} (tol 1e-2) over branches {sorted(branches)}, "
           f"{dt:.1f} s (limit 300 s)")


def test_c08_attainability():
    t0 = time.perf_counter()
    worst_cat = 0.0
    for m1, m2 in ((0.14, 0.3), (0.12, 0.5), (0.05, 0.3), (0.02, 0.5)):
        ps = PhaseSet.from_lists([1.0, 2.0, INF], [m1, m2, 1.0 - m1 - m2])
        b = three_material_bound(1.0, 2.0, m1, m2)[0]
        ch = optimize_at_fractions("L(13,2,13)", ps, ISO, ps.fractions)
        worst_cat = max(worst_cat, abs(ch.value - b) / b)
    rows = {r["structure"]: r for r in attainability_report({"n": 128})}
    fem = {k: rows[k]["gap_bound_fem"] for k in ("L(12,1)", "HS(13)")}
    dt = time.perf_counter() - t0
    ok = worst_cat < 1e-4 and max(fem.values()) < 0.03 and dt < 600
    report(8, "attainability", ok,
           f"catalog gap {worst_cat:.2e} (tol 1e-4); FEM n=128 gaps L(12,1) {fem['L(12,1)']:.4f}, "
           f"coated circles {fem['HS(13)']:.4f} (tol 0.03); {dt:.1f} s (limit 600 s)")


def test_c09_regime_diagonal():
    k1, k2, g = 1.0, 2.0, 0.6
    ps = PhaseSet.from_lists([k1, k2, INF])
    r = thresholds(k1, k2, g)
    lams = [lam for lam in np.linspace(0.02, 1.0, 25)
            if min(abs(lam * math.sqrt(2.0) - x) for x in r) > 1e-3]
    got = [regime_map(ps, g, [lam], [lam])[0, 0] for lam in lams]
    want = [envelope_eval(lam * math.sqrt(2.0), k1, k2, g).structure for lam in lams]
    bands = [w for i, w in enumerate(want) if i == 0 or want[i - 1] != w]
    report(9, "regime map diagonal", got == want,
           f"{sum(a == b for a, b in zip(got, want))}/{len(lams)} labels match, bands {bands}")


def test_c10_hs_paradox():
    a = hs_bound(PhaseSet.from_lists([0.5, 2.0, INF], [0.0, 0.5, 0.5]))
    b = hs_bound(PhaseSet.from_lists([1.0, 2.0, INF], [0.0, 0.5, 0.5]))
    report(10, "HS paradox", abs(a - b) > 1e-6,
           f"hs(m1=0) = {a!r} for k1=0.5 and {b!r} for k1=1")


@pytest.mark.slow
def test_c11_topopt():
    pr = DesignProblem()
    t0 = time.perf_counter()
    design, history = solve_design(pr)
    dt = time.perf_counter() - t0
    mono = float(np.max(np.diff(history))) if len(history) > 1 else 0.0
    base = baselines(pr)
    below = all(design.objective < v for v in base.values())
    mirrored, _ = solve_design(mirror_problem(pr))
    sym = (np.array_equal(mirrored.fractions[::-1], design.fractions)
           and np.array_equal(mirrored.labels[::-1], design.labels))
    fast = solve_design(replace(pr, fast_path=False))[0].objective
    agree = abs(fast - design.objective) / design.objective
    ok = mono <= 1e-8 and below and sym and dt < 900 and agree < 5e-3
    report(11, "topopt cantilever", ok,
           f"max history step {mono:.2e} (slack 1e-8); J {design.objective:.6f} vs baselines "
           + ", ".join(f"{k} {v:.6f}" for k, v in base.items())
           + f"; mirror {'exact' if sym else 'broken'}; fast-path gap {agree:.1e} (tol 5e-3); "
           f"{dt:.1f} s (limit 900 s)")


def test_c12_determinism(tmp_path):
    cfg = tmp_path / "t.json"
    cfg.write_text('{"topopt": {"nx": 16, "ny": 8, "max_iter": 5}}')
    cmds = [
        ["envelope", "--kappa", "1,2", "--gamma", "0.6", "--steps", "50", "--out", "{}.csv"],
        ["regimes", "--kappa", "1,2,inf", "--gamma", "0.6", "--steps", "3", "--out", "{}"],
        ["topopt", "--config", str(cfg), "--kappa", "1,2,inf", "--out", "{}"],
    ]
    for rep in ("a", "b"):
        for i, c in enumerate(cmds):
            base = str(tmp_path / f"{rep}{i}")
            assert run([x.format(base) if "{}" in x else x for x in c]) == 0
    same, total = 0, 0
    for p in sorted(tmp_path.glob("a*.*")):
        total += 1
        same += p.read_bytes() == (tmp_path / ("b" + p.name[1:])).read_bytes()
    report(12, "determinism", same == total and total >= 7, f"{same}/{total} artifacts byte-identical")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
