"""Isotropic part of the three-well quasiconvex envelope.

Scalar convention: an isotropic load of intensity ``s`` is ``sigma = (s / sqrt 2) I`` so
that ``Tr sigma**2 = s**2`` and a pure phase stores ``0.5 * kappa * s**2``. Costs are
normalised to ``gamma_1 = 1`` (strong), ``gamma_2 = gamma``, ``gamma_3 = 0`` (void).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .bounds import three_material_bound, three_material_bound_array


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class EnvelopePoint:
    s: float
    regime: str
    m: tuple
    value: float
    kappa_eff: float
    strain: float
    structure: str = ""


def gamma_interval(k1, k2):
    if not 0 < k1 < k2:
        raise EnvelopeError("need 0 < k1 < k2")
    return k1 / k2, 2.0 * k1 / (k1 + k2)


def thresholds(k1, k2, gamma):
    if not 0.0 <= gamma <= 1.0:
        raise EnvelopeError(f"cost gamma must lie in [0, 1], got {gamma}")
    if not 0 < k1 < k2:
        raise EnvelopeError("need 0 < k1 < k2")
    r1 = gamma / math.sqrt(k1)
    r2 = 2.0 * math.sqrt(k1 * (1.0 - gamma) / (k2 * k2 - k1 * k1))
    r3 = math.sqrt((1.0 - gamma) * (k1 + k2) / (k1 * (k2 - k1)))
    return r1, r2, r3


def in_three_phase_range(k1, k2, gamma):
    ga, gb = gamma_interval(k1, k2)
    return ga <= gamma <= gb


def _u3_coefficients(k1, k2, gamma):
    d = k2 - k1
    lin = 2.0 * math.sqrt(k1 * (k1 + k2) * (1.0 - gamma) / d)
    const = (gamma * (k1 + k2) - 2.0 * k1) / d
    return lin, const


def _closed_form(s, k1, k2, gamma):
    r1, r2, r3 = thresholds(k1, k2, gamma)
    if s <= r1:
        m1 = (k1 / gamma) * (gamma / math.sqrt(k1) - s) * s
        m2 = k1 * s * s / (gamma * gamma)
        slope = k2 - 2.0 * k1 / gamma
        qf = 0.5 * slope * s * s + 2.0 * math.sqrt(k1) * s
        eps = slope * s + 2.0 * math.sqrt(k1)
        return "U1", (m1, m2), qf, eps, ("void" if s == 0 else "L(13,2,13)")
    if s <= r2:
        return "U2", (0.0, 1.0), 0.5 * k2 * s * s + gamma, k2 * s, "k2"
    if s <= r3:
        lin, const = _u3_coefficients(k1, k2, gamma)
        m1 = -2.0 * k1 / (k2 - k1) + s * math.sqrt(k1 * (k1 + k2) / ((1.0 - gamma) * (k2 - k1)))
        qf = -0.5 * k1 * s * s + lin * s + const
        return "U3", (m1, 1.0 - m1), qf, -k1 * s + lin, "L(12,1)"
    return "U4", (1.0, 0.0), 0.5 * k1 * s * s + 1.0, k1 * s, "k1"


def envelope_eval(s, k1, k2, gamma, *, grid_n=400) -> EnvelopePoint:
    """Relaxed energy plus cost at isotropic load intensity ``s``.

    Inside ``[gamma_a, gamma_b]`` the four closed-form regimes apply. Outside that interval
    only two-material or pure structures are optimal; the value is then taken from the
    numerical oracle and the regime is reported as ``"degenerate"``.
    """
    if s < 0:
        raise EnvelopeError("load intensity s must be nonnegative")
    if not in_three_phase_range(k1, k2, gamma):
        thresholds(k1, k2, gamma)  # validates gamma in [0, 1]
        value, m1, m2 = envelope_oracle(s, k1, k2, gamma, grid_n=grid_n)
        kap = _kappa(k1, k2, m1, m2)
        h = 1e-6 * max(1.0, s)
        lo = max(s - h, 0.0)
        eps = (envelope_oracle(s + h, k1, k2, gamma, grid_n=grid_n)[0]
               - envelope_oracle(lo, k1, k2, gamma, grid_n=grid_n)[0]) / (s + h - lo)
        return EnvelopePoint(s, "degenerate", (m1, m2, 1.0 - m1 - m2), value, kap, eps,
                             structure_for_fractions(m1, m2))
    regime, (m1, m2), qf, eps, label = _closed_form(s, k1, k2, gamma)
    m3 = 1.0 - m1 - m2
    return EnvelopePoint(s, regime, (m1, m2, m3), qf, _kappa(k1, k2, m1, m2), eps, label)


def _kappa(k1, k2, m1, m2):
    m1 = min(max(m1, 0.0), 1.0)
    m2 = min(max(m2, 0.0), 1.0 - m1)
    return three_material_bound(k1, k2, m1, m2)[0]


def structure_for_fractions(m1, m2, tol=1e-6):
    m3 = 1.0 - m1 - m2
    used = tuple(x > tol for x in (m1, m2, m3))
    return {
        (True, False, False): "k1",
        (False, True, False): "k2",
        (False, False, True): "void",
        (True, True, False): "L(12,1)",
        (True, False, True): "HS(13)",
        (False, True, True): "HS(23)",
    }.get(used, "L(13,2,13)")


def strain_curve(s_list, k1, k2, gamma):
    out = []
    prev = -math.inf
    for s in s_list:
        if s < prev:
            raise EnvelopeError("s values must be sorted")
        prev = s
        out.append((s, envelope_eval(s, k1, k2, gamma).strain))
    return out


def _objective(s, k1, k2, gamma, m1, m2):
    b = three_material_bound_array(k1, k2, m1, m2)
    energy = 0.0 if s == 0 else 0.5 * b * s * s
    return energy + m1 + gamma * m2


def envelope_oracle(s, k1, k2, gamma, grid_n=2000, refine=True):
    """Brute-force ``min_m 0.5 * b2(m) * s**2 + m1 + gamma * m2`` over the simplex.

    A ``grid_n``-step triangular grid is scanned, then the best points are polished by
    constrained local descent together with exact 1D searches along the three edges.
    Returns ``(value, m1, m2)``.
    """
    if s < 0:
        raise EnvelopeError("load intensity s must be nonnegative")
    i, j = np.triu_indices(grid_n + 1)
    m1 = (j - i) / grid_n
    m2 = i / grid_n
    with np.errstate(over="ignore", invalid="ignore"):
        f = _objective(s, k1, k2, gamma, m1, m2)
    f = np.where(np.isnan(f), np.inf, f)
    order = np.argsort(f, kind="stable")
    cands = [(float(f[order[0]]), float(m1[order[0]]), float(m2[order[0]]))]
    if not refine:
        return cands[0]

    def F(x):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            v = float(_objective(s, k1, k2, gamma, x[0], x[1]))
        return v if np.isfinite(v) else 1e30

    for a, b in ((1.0, 0.0), (0.0, 1.0), (0.0, 0.0)):
        cands.append((F((a, b)), a, b))
    edges = (
        lambda u: (u, 0.0),
        lambda u: (0.0, u),
        lambda u: (u, 1.0 - u),
    )
    for e in edges:
        r = minimize_scalar(lambda u: F(e(u)), bounds=(0.0, 1.0), method="bounded",
                            options={"xatol": 1e-13})
        cands.append((float(r.fun), *e(float(r.x))))
    cons = [{"type": "ineq", "fun": lambda x: 1.0 - x[0] - x[1]}]
    seen = 0
    for k in order[:50]:
        if seen >= 4:
            break
        if not np.isfinite(f[k]):
            break
        seen += 1
        x0 = np.array([m1[k], m2[k]])
        r = minimize(F, x0, method="SLSQP", bounds=[(0.0, 1.0)] * 2, constraints=cons,
                     options={"ftol": 1e-15, "maxiter": 500})
        x = np.clip(r.x, 0.0, 1.0)
        if x.sum() > 1.0:
            x = x / x.sum()
        cands.append((F(x), float(x[0]), float(x[1])))
    return min(cands, key=lambda c: c[0])
