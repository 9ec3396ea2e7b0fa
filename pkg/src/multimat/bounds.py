"""Lower bounds on the effective compliance of multiphase zero-Poisson composites.

Energies follow the tensor convention ``0.5 * kappa * Tr(sigma**2)``: an isotropic
load ``sigma0 = s * I`` stores ``kappa * s**2`` in a material of compliance ``kappa``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .tensor import StressTensor

INF = math.inf


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class Phase:
    kappa: float
    cost: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0):
            raise BoundError(f"compliance must be positive, got {self.kappa}")
        if self.cost < 0:
            raise BoundError(f"cost must be nonnegative, got {self.cost}")

    @property
    def is_void(self):
        return math.isinf(self.kappa)

    @property
    def stiffness(self):
        return 0.0 if self.is_void else 1.0 / self.kappa


@dataclass(frozen=True)
class PhaseSet:
    """Phases ordered by increasing compliance, optionally with volume fractions."""

    phases: tuple
    fractions: tuple | None = None

    def __post_init__(self):
        phases = tuple(p if isinstance(p, Phase) else Phase(*p) for p in self.phases)
        object.__setattr__(self, "phases", phases)
        if not phases:
            raise BoundError("empty phase set")
        k = [p.kappa for p in phases]
        if any(b <= a for a, b in zip(k, k[1:])):
            raise BoundError(f"compliances must be strictly increasing, got {k}")
        if self.fractions is not None:
            m = tuple(float(x) for x in self.fractions)
            if len(m) != len(phases):
                raise BoundError("one volume fraction per phase is required")
            if any(x < -1e-12 or x > 1 + 1e-12 for x in m):
                raise BoundError(f"volume fractions must lie in [0, 1], got {m}")
            if abs(sum(m) - 1.0) > 1e-12:
                raise BoundError(f"volume fractions must sum to 1, got {sum(m)!r}")
            object.__setattr__(self, "fractions", m)

    @classmethod
    def from_lists(cls, kappas, fractions=None, costs=None):
        costs = costs if costs is not None else [0.0] * len(kappas)
        return cls(tuple(Phase(float(k), float(g)) for k, g in zip(kappas, costs)), fractions)

    def with_fractions(self, fractions):
        return PhaseSet(self.phases, tuple(fractions))

    @property
    def kappas(self):
        return tuple(p.kappa for p in self.phases)

    @property
    def costs(self):
        return tuple(p.cost for p in self.phases)

    def __len__(self):
        return len(self.phases)

    def _need_fractions(self):
        if self.fractions is None:
            raise BoundError("volume fractions are not set")
        return self.fractions


@dataclass
class SupportSet:
    """Supporting stresses of one phase, with optional weights (summing to its fraction)."""

    points: list
    owner: int = 0
    weights: list | None = None


# ----------------------------------------------------------------------------- wells


def well_energy(phase: Phase, sigma: StressTensor) -> float:
    if phase.is_void:
        if sigma.frob2 != 0.0:
            raise BoundError("void cannot carry stress")
        return 0.0
    return 0.5 * phase.kappa * sigma.frob2


def multiwell_lagrangian(phases: PhaseSet, sigma: StressTensor):
    """Pointwise minimum over wells of ``W_i(sigma) + cost_i``.

    Returns ``(value, index)``; ties go to the phase with smaller compliance.
    """
    best, arg = INF, -1
    for i, ph in enumerate(phases.phases):
        if ph.is_void:
            v = ph.cost if sigma.frob2 == 0.0 else INF
        else:
            v = 0.5 * ph.kappa * sigma.frob2 + ph.cost
        if v < best:
            best, arg = v, i
    return best, arg


def translated_well(phase: Phase, sigma: StressTensor, t: float) -> float:
    """Well energy plus ``t * det(sigma)``, infinite outside the cone ``det >= 0``.

    The cone restriction keeps the translated well bounded below for every ``t >= 0``
    (it is ``>= kappa * trace**2 / 2`` there), even when it is nonconvex for ``t > kappa``.
    """
    d = sigma.det
    if d < 0:
        return INF
    if phase.is_void:
        return 0.0 if sigma.frob2 == 0.0 else INF
    return 0.5 * phase.kappa * sigma.frob2 + t * d


# ------------------------------------------------------------------- closed-form bounds


def wiener_bound(phases: PhaseSet) -> float:
    """Harmonic mean of the compliances (arithmetic mean of stiffnesses)."""
    m = phases._need_fractions()
    s = sum(mi * p.stiffness for mi, p in zip(m, phases.phases))
    if s <= 0:
        raise BoundError("Wiener bound undefined: no load-bearing material")
    return 1.0 / s


def hs_bound(phases: PhaseSet) -> float:
    """Hashin-Shtrikman lower bound on the isotropic effective compliance.

    ``-k1 + (sum_i m_i / (k_i + k1))**-1`` with ``k1`` the smallest compliance.
    """
    m = phases._need_fractions()
    k1 = phases.phases[0].kappa
    if math.isinf(k1):
        raise BoundError("Hashin-Shtrikman bound undefined for an all-void set")
    s = sum(mi / (p.kappa + k1) for mi, p in zip(m, phases.phases) if not p.is_void)
    return INF if s == 0 else -k1 + 1.0 / s


def three_material_thresholds(k1, k2, m2):
    r = math.sqrt(m2) - m2
    return 2.0 * k1 * r / (k2 + k1), k1 * r / k2


def _branch_values(k1, k2, m1, m2):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        b1 = -k1 + 1.0 / (m1 / (2.0 * k1) + m2 / (k1 + k2))
        b2 = k2 + 2.0 * k1 * (1.0 - np.sqrt(m2)) ** 2 / m1
        b3 = -k2 + 1.0 / (m1 / (2.0 * k1) + m2 / (2.0 * k2))
    return b1, b2, b3


def three_material_bound(k1, k2, m1, m2):
    """Isotropic compliance bound for ``k1 < k2`` and void; returns ``(value, branch)``.

    Branch 1 (Hashin-Shtrikman) holds for ``m1 >= m11``, branch 2 for
    ``m12 <= m1 < m11`` and branch 3 below ``m12``.
    """
    if not 0 < k1 < k2:
        raise BoundError("need 0 < k1 < k2")
    if m1 < 0 or m2 < 0 or m1 + m2 > 1 + 1e-12:
        raise BoundError(f"infeasible fractions m1={m1}, m2={m2}")
    m11, m12 = three_material_thresholds(k1, k2, m2)
    if m1 == 0 and m2 == 0:
        return INF, 3
    b1, b2, b3 = _branch_values(k1, k2, m1, m2)
    if m1 >= m11:
        return float(b1), 1
    if m1 >= m12 and m1 > 0:
        return float(b2), 2
    return float(b3), 3


def three_material_bound_array(k1, k2, m1, m2):
    """Vectorised :func:`three_material_bound` (values only, inf at ``m1 = m2 = 0``)."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    r = np.sqrt(m2) - m2
    m11 = 2.0 * k1 * r / (k2 + k1)
    m12 = k1 * r / k2
    b1, b2, b3 = _branch_values(k1, k2, m1, m2)
    out = np.where(m1 >= m11, b1, np.where((m1 >= m12) & (m1 > 0), b2, b3))
    return np.where((m1 == 0) & (m2 == 0), np.inf, out)


# ------------------------------------------------------------- pointwise constraints


def _abc(p):
    if isinstance(p, StressTensor):
        return np.array([0.5 * (p.sxx + p.syy), 0.5 * (p.sxx - p.syy), p.sxy])
    return np.asarray(p, dtype=float)


_J = np.diag([1.0, -1.0, -1.0])


def hull_det_range(points, rho=None):
    """Exact min and max of ``det(x - rho)`` over the convex hull of ``points``.

    ``det`` is an indefinite quadratic form, so its extrema over a polytope sit at
    stationary points of some face. In three dimensions every hull point lies in a
    simplex spanned by at most four of the points, so enumerating those faces is exact.
    """
    base = _abc(rho) if rho is not None else np.zeros(3)
    pts = [_abc(p) - base for p in points]
    if not pts:
        raise BoundError("empty support set")
    lo, hi = INF, -INF
    n = len(pts)
    for k in range(1, min(n, 4) + 1):
        for sub in itertools.combinations(range(n), k):
            p0 = pts[sub[0]]
            if k == 1:
                v = p0 @ _J @ p0
                lo, hi = min(lo, v), max(hi, v)
                continue
            D = np.stack([pts[j] - p0 for j in sub[1:]], axis=1)
            A = D.T @ _J @ D
            rhs = -D.T @ _J @ p0
            try:
                mu = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(mu < -1e-12) or mu.sum() > 1 + 1e-12:
                continue
            x = p0 + D @ mu
            v = x @ _J @ x
            lo, hi = min(lo, v), max(hi, v)
    return lo, hi


def compatibility_check(rho: StressTensor, others: SupportSet, tol=1e-10) -> bool:
    """True if some tensor in the hull of ``others`` is rank-one connected to ``rho``."""
    pts = others.points if isinstance(others, SupportSet) else list(others)
    lo, hi = hull_det_range(pts, rho)
    return lo <= tol and hi >= -tol


def mean_field_check(rho1: StressTensor, sigma0: StressTensor) -> bool:
    return (rho1 - sigma0).det <= 1e-12


# ------------------------------------------------------- numerical translation bound


@dataclass
class TranslationBound:
    """Result of :func:`modified_translation_bound`.

    ``value`` is the energy bound (tensor convention), ``t_opt`` the maximising
    translation parameter and ``supports`` one :class:`SupportSet` per finite phase.
    """

    value: float
    t_opt: float
    supports: list
    region: str = ""
    active: dict = field(default_factory=dict)
    evaluations: int = 0


class _InnerProblem:
    """Unconstrained inner problem over support moments ``y_k = w_k * rho_k``.

    Minimises ``sum_k Q_i(y_k) / w_k``; bounded only for ``t <= kappa_1``.
    """

    def __init__(self, kappas, fractions, sigma0, n_supports):
        self.kappas = kappas
        self.fractions = fractions
        self.s0 = _abc(sigma0)
        self.K = n_supports
        self.owner = np.repeat(np.arange(len(kappas)), n_supports)
        self.n = len(self.owner)

    def unpack(self, x):
        x = x.reshape(self.n, 4)
        return x[:, :3], x[:, 3]

    def objective(self, x, t):
        y, w = self.unpack(x)
        k = np.asarray(self.kappas)[self.owner]
        diag = np.stack([k + t, k - t, k - t], axis=1)
        q = np.sum(diag * y * y, axis=1)
        f = np.sum(q / w)
        gy = 2.0 * diag * y / w[:, None]
        gw = -q / (w * w)
        return f, np.concatenate([gy, gw[:, None]], axis=1).ravel()

    def constraints(self):
        n, K = self.n, self.K

        def eq_fun(x):
            y, w = self.unpack(x)
            out = [y.sum(axis=0) - self.s0]
            out.append(np.array([w[i * K:(i + 1) * K].sum() - m for i, m in enumerate(self.fractions)]))
            return np.concatenate(out)

        jac_eq = np.zeros((3 + len(self.fractions), 4 * n))
        for j in range(n):
            for c in range(3):
                jac_eq[c, 4 * j + c] = 1.0
            jac_eq[3 + self.owner[j], 4 * j + 3] = 1.0
        return [{"type": "eq", "fun": eq_fun, "jac": lambda x: jac_eq}]

    def bounds(self):
        return ([(None, None)] * 3 + [(1e-9, None)]) * self.n

    def random_start(self, rng):
        scale = max(np.linalg.norm(self.s0), 1e-3)
        xs = []
        for i, m in enumerate(self.fractions):
            w = rng.dirichlet(np.ones(self.K)) * m
            w = np.maximum(w, 1e-3 * m)
            w *= m / w.sum()
            for k in range(self.K):
                rho = self.s0 + scale * rng.normal(size=3)
                xs.append(np.concatenate([w[k] * rho, [w[k]]]))
        return np.concatenate(xs)

    def points(self, x):
        y, w = self.unpack(x)
        return y / w[:, None], w


class _ConeProblem:
    """Inner problem with every support inside the cone ``det rho >= 0``.

    Each support is ``rho = a (1, v1, v2)`` in (a, b, c) coordinates with
    ``v1**2 + v2**2 <= 1``, which keeps the translated energy bounded for any ``t``.
    Variables per support: ``(a, v1, v2, w)``.
    """

    def __init__(self, kappas, fractions, sigma0, n_supports):
        self.kappas = kappas
        self.fractions = fractions
        self.s0 = _abc(sigma0)
        self.K = n_supports
        self.owner = np.repeat(np.arange(len(kappas)), n_supports)
        self.n = len(self.owner)
        self.kap = np.asarray(kappas, dtype=float)[self.owner]

    def unpack(self, x):
        x = x.reshape(self.n, 4)
        return x[:, 0], x[:, 1:3], x[:, 3]

    def points(self, x):
        a, v, w = self.unpack(x)
        return a[:, None] * np.column_stack([np.ones(self.n), v]), w

    def objective(self, x, t):
        a, v, w = self.unpack(x)
        v2 = np.sum(v * v, axis=1)
        g = (self.kap + t) + (self.kap - t) * v2
        f = np.sum(w * a * a * g)
        grad = np.empty((self.n, 4))
        grad[:, 0] = 2.0 * w * a * g
        grad[:, 1:3] = (w * a * a * 2.0 * (self.kap - t))[:, None] * v
        grad[:, 3] = a * a * g
        return f, grad.ravel()

    def constraints(self):
        n, K = self.n, self.K
        nf = len(self.fractions)
        s0 = self.s0

        def eq_fun(x):
            a, v, w = self.unpack(x)
            y = (w * a)[:, None] * np.column_stack([np.ones(n), v])
            wsum = np.array([w[i * K:(i + 1) * K].sum() - m for i, m in enumerate(self.fractions)])
            return np.concatenate([y.sum(axis=0) - s0, wsum])

        def eq_jac(x):
            a, v, w = self.unpack(x)
            J = np.zeros((3 + nf, 4 * n))
            for j in range(n):
                u = np.array([1.0, v[j, 0], v[j, 1]])
                J[0:3, 4 * j] = w[j] * u
                J[1, 4 * j + 1] = w[j] * a[j]
                J[2, 4 * j + 2] = w[j] * a[j]
                J[0:3, 4 * j + 3] = a[j] * u
                J[3 + self.owner[j], 4 * j + 3] = 1.0
            return J

        def cone_fun(x):
            _, v, _ = self.unpack(x)
            return 1.0 - np.sum(v * v, axis=1)

        def cone_jac(x):
            _, v, _ = self.unpack(x)
            J = np.zeros((n, 4 * n))
            for j in range(n):
                J[j, 4 * j + 1:4 * j + 3] = -2.0 * v[j]
            return J

        first = np.flatnonzero(self.owner == 0)
        sign = np.array([1.0, -1.0, -1.0])

        def mf_fun(x):
            a, v, _ = self.unpack(x)
            d = a[first, None] * np.column_stack([np.ones(len(first)), v[first]]) - s0
            return -np.sum(sign * d * d, axis=1)

        def mf_jac(x):
            a, v, _ = self.unpack(x)
            J = np.zeros((len(first), 4 * n))
            for r, j in enumerate(first):
                u = np.array([1.0, v[j, 0], v[j, 1]])
                d = a[j] * u - s0
                g = -2.0 * sign * d
                J[r, 4 * j] = g @ u
                J[r, 4 * j + 1] = g[1] * a[j]
                J[r, 4 * j + 2] = g[2] * a[j]
            return J

        return [{"type": "eq", "fun": eq_fun, "jac": eq_jac},
                {"type": "ineq", "fun": cone_fun, "jac": cone_jac},
                {"type": "ineq", "fun": mf_fun, "jac": mf_jac}]

    def bounds(self):
        return [(None, None), (-1.0, 1.0), (-1.0, 1.0), (1e-9, None)] * self.n

    def random_start(self, rng):
        scale = max(abs(self.s0[0]), np.hypot(self.s0[1], self.s0[2]), 1e-3)
        xs = []
        for m in self.fractions:
            w = rng.dirichlet(np.ones(self.K)) * m
            w = np.maximum(w, 1e-3 * m)
            w *= m / w.sum()
            for k in range(self.K):
                r = rng.uniform(0.0, 1.0)
                th = rng.uniform(0.0, 2.0 * math.pi)
                xs.append([scale * rng.normal(1.0, 1.0), r * math.cos(th), r * math.sin(th), w[k]])
        return np.asarray(xs, dtype=float).ravel()


def modified_translation_bound(
    phases: PhaseSet,
    sigma0: StressTensor,
    n_supports: int = 3,
    *,
    starts: int = 8,
    seed: int = 0,
    constraints: bool = True,
    t_max: float | None = None,
    tol: float = 1e-8,
) -> TranslationBound:
    """Translation bound sharpened by the cone and mean-field constraints.

    For each translation parameter ``t`` the inner problem distributes each phase's
    fraction over ``n_supports`` supporting stresses and minimises the translated energy
    ``sum w (0.5 kappa Tr rho^2 + t det rho) - t det sigma0`` subject to the average-stress
    constraint, ``det rho >= 0`` and ``det(rho_1 - sigma0) <= 0`` on the stiffest phase.
    The bound is the maximum over ``t`` (the inner minimum is concave in ``t``).

    With ``constraints=False`` and ``t_max <= kappa_1`` this is the classical
    translation bound.
    """
    m = phases._need_fractions()
    if sigma0.det < 0:
        raise BoundError("anisotropic negative-det loading unsupported")
    if not 1 <= n_supports <= 4:
        raise BoundError("n_supports must be between 1 and 4")
    finite = [(p.kappa, mi) for p, mi in zip(phases.phases, m) if not p.is_void and mi > 0]
    if not finite:
        raise BoundError("infeasible fractions: no load-bearing phase")
    kappas = [k for k, _ in finite]
    fr = [mi for _, mi in finite]
    k_ref = kappas[1] if len(kappas) > 1 else kappas[0]
    if t_max is None:
        t_max = 4.0 * k_ref if constraints else kappas[0]
    if constraints:
        prob = _ConeProblem(kappas, fr, sigma0, n_supports)
    else:
        if t_max > kappas[0]:
            raise BoundError("without pointwise constraints t must not exceed kappa_1")
        prob = _InnerProblem(kappas, fr, sigma0, n_supports)
    cons = prob.constraints()
    bnds = prob.bounds()
    rng = np.random.default_rng(seed)
    pool = [prob.random_start(rng) for _ in range(starts)]
    det0 = sigma0.det
    cache = {}
    state = {"x": None, "evals": 0}

    def inner(t):
        if t in cache:
            return cache[t][0]
        best_f, best_x = INF, None
        seeds = list(pool)
        if state["x"] is not None:
            seeds.insert(0, state["x"])
        for x0 in seeds:
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", "Values in x were outside bounds")
                res = minimize(prob.objective, x0, args=(t,), jac=True, method="SLSQP",
                               bounds=bnds, constraints=cons,
                               options={"ftol": tol * 1e-2, "maxiter": 400})
            state["evals"] += 1
            if not _feasible(cons, res.x, 1e-7):
                continue
            if res.fun < best_f:
                best_f, best_x = res.fun, res.x
        if best_x is None:
            raise BoundError(f"inner problem found no feasible point at t={t}")
        state["x"] = best_x
        val = best_f - t * det0
        cache[t] = (val, best_x)
        return val

    t_opt = _golden_max(inner, 0.0, t_max, xtol=1e-6 * max(t_max, 1.0))
    for t_end in (0.0, t_max):
        if inner(t_end) > inner(t_opt):
            t_opt = t_end
    value, x = cache[t_opt]
    rho, w = prob.points(x)
    supports = []
    for i in range(len(kappas)):
        sel = slice(i * n_supports, (i + 1) * n_supports)
        pts = [_from_abc(r) for r in rho[sel]]
        supports.append(SupportSet(pts, owner=i, weights=list(w[sel])))
    active = _active_constraints(supports, sigma0)
    region = _region_label(t_opt, kappas, active)
    return TranslationBound(float(value), float(t_opt), supports, region, active, state["evals"])


def _feasible(cons, x, tol):
    for c in cons:
        v = np.atleast_1d(c["fun"](x))
        if c["type"] == "eq" and np.max(np.abs(v)) > tol:
            return False
        if c["type"] == "ineq" and np.min(v) < -tol:
            return False
    return True


def _from_abc(v):
    return StressTensor(v[0] + v[1], v[0] - v[1], v[2])


def _golden_max(f, a, b, xtol):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def _active_constraints(supports, sigma0, tol=1e-6):
    scale = max(sigma0.frob2, 1e-12)
    cone = any(abs(p.det) <= tol * scale for s in supports for p in s.points)
    mean_field = any(abs((p - sigma0).det) <= tol * scale for p in supports[0].points)
    return {"cone": cone, "mean_field": mean_field}


def _region_label(t, kappas, active):
    """Best-effort mapping of the optimum onto the A-E regions (diagnostic only)."""
    k1 = kappas[0]
    k2 = kappas[1] if len(kappas) > 1 else INF
    rtol = 1e-3
    if abs(t - k1) <= rtol * k1:
        return "D"
    if abs(t - k2) <= rtol * k2:
        return "A"
    if k1 < t < k2:
        return "E" if active.get("mean_field") else "B"
    return "C"
