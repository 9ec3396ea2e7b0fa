"""Hierarchical laminates: effective tensors, a structure catalog and per-load optimisation.

Maps act on Mandel stress coordinates ``(sxx, syy, sqrt2 * sxy)`` and are stored in
stiffness form, so void is exactly the zero matrix. A lamination ``angle`` is the
direction of the layer normal measured from the x-axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import differential_evolution, minimize

from .bounds import PhaseSet
from .tensor import SQRT2, StressTensor, eigen, rotation_matrix


class LaminateError(ValueError):
    pass


class ComplianceMap:
    """Effective elastic map kept as a symmetric PSD stiffness matrix."""

    def __init__(self, stiffness):
        c = np.array(stiffness, dtype=float)
        if c.shape != (3, 3):
            raise LaminateError("stiffness must be 3x3")
        self.stiffness = 0.5 * (c + c.T)

    @classmethod
    def isotropic(cls, kappa):
        if math.isinf(kappa):
            return cls(np.zeros((3, 3)))
        return cls(np.eye(3) / kappa)

    @classmethod
    def from_compliance(cls, K):
        return cls(np.linalg.inv(np.asarray(K, dtype=float)))

    @property
    def finite_compliance(self):
        w = np.linalg.eigvalsh(self.stiffness)
        return w[0] > 1e-12 * max(w[-1], 1e-300)

    @property
    def is_void(self):
        return not np.any(self.stiffness)

    @property
    def compliance(self):
        """Inverse of the stiffness; infinite entries are not representable, so this raises."""
        if not self.finite_compliance:
            raise LaminateError("map has zero-stiffness directions; compliance is unbounded")
        return np.linalg.inv(self.stiffness)

    def rotated(self, theta):
        R = rotation_matrix(theta)
        return ComplianceMap(R @ self.stiffness @ R.T)

    def energy(self, sigma: StressTensor, rtol=1e-9):
        """``0.5 sigma : K sigma``; infinite if ``sigma`` loads a zero-stiffness direction."""
        v = sigma.mandel() if isinstance(sigma, StressTensor) else np.asarray(sigma, float)
        w, V = np.linalg.eigh(self.stiffness)
        c = V.T @ v
        big = w > 1e-12 * max(w[-1], 1e-300)
        if np.any(np.abs(c[~big]) > rtol * max(np.linalg.norm(v), 1e-300)):
            return math.inf
        return 0.5 * float(np.sum(c[big] ** 2 / w[big]))

    def isotropic_part(self):
        """Effective compliance seen by an isotropic load: ``energy(I) = kappa``."""
        return self.energy(StressTensor(1.0, 1.0, 0.0))

    def __repr__(self):
        return f"ComplianceMap(stiffness={self.stiffness.tolist()})"


def _traction_basis(angle):
    n0, n1 = math.cos(angle), math.sin(angle)
    return np.array([[n0, 0.0], [0.0, n1], [n1 / SQRT2, n0 / SQRT2]])


def laminate_pair(A: ComplianceMap, B: ComplianceMap, f: float, angle: float) -> ComplianceMap:
    """Rank-one laminate of ``A`` (volume fraction ``f``) and ``B`` with normal at ``angle``.

    Strain jumps across the layers are ``sym(a x n)``; eliminating the jump amplitude ``a``
    gives ``C = f CA + (1-f) CB - f(1-f) dC N P^+ N^T dC`` with
    ``P = (1-f) N^T CA N + f N^T CB N`` and ``dC = CA - CB``.
    """
    if not 0.0 <= f <= 1.0:
        raise LaminateError(f"lamination fraction must lie in [0, 1], got {f}")
    if f == 1.0:
        return ComplianceMap(A.stiffness)
    if f == 0.0:
        return ComplianceMap(B.stiffness)
    CA, CB = A.stiffness, B.stiffness
    N = _traction_basis(angle)
    dC = CA - CB
    P = (1.0 - f) * N.T @ CA @ N + f * N.T @ CB @ N
    Pp = np.linalg.pinv(P, rcond=1e-13, hermitian=True)
    C = f * CA + (1.0 - f) * CB - f * (1.0 - f) * dC @ N @ Pp @ N.T @ dC
    return ComplianceMap(C)


# ----------------------------------------------------------------------------- trees


@dataclass(frozen=True)
class Leaf:
    phase: int


@dataclass(frozen=True)
class Lam:
    a: object
    b: object
    f: float
    angle: float = 0.0


LaminateNode = Leaf | Lam


def depth(node):
    return 0 if isinstance(node, Leaf) else 1 + max(depth(node.a), depth(node.b))


def effective_map(node, phases: PhaseSet) -> ComplianceMap:
    if isinstance(node, Leaf):
        return ComplianceMap.isotropic(phases.phases[node.phase].kappa)
    return laminate_pair(effective_map(node.a, phases), effective_map(node.b, phases), node.f, node.angle)


def node_fractions(node, n_phases):
    if isinstance(node, Leaf):
        out = np.zeros(n_phases)
        out[node.phase] = 1.0
        return out
    return node.f * node_fractions(node.a, n_phases) + (1.0 - node.f) * node_fractions(node.b, n_phases)


def rotate_node(node, theta):
    if isinstance(node, Leaf):
        return node
    return Lam(rotate_node(node.a, theta), rotate_node(node.b, theta), node.f, _wrap(node.angle + theta))


def _wrap(a):
    a = math.remainder(a, math.pi)
    return math.pi / 2 if a <= -math.pi / 2 else a


def evaluate_structure(node, phases: PhaseSet, sigma0: StressTensor):
    """Energy ``0.5 sigma0 : K* sigma0`` of a laminate tree and its phase fractions."""
    return effective_map(node, phases).energy(sigma0), list(node_fractions(node, len(phases)))


# ----------------------------------------------------------------- aligned catalog
#
# Every catalog structure laminates along the two principal axes of the load only.
# Such laminates keep the stiffness diagonal (X, Y, S) in Mandel coordinates: along the
# normal and in shear the layers act in series, along the layers in parallel. This makes
# batched evaluation over thousands of parameter vectors cheap.

ROLE_NAMES = ("strong", "intermediate", "weak")


def _leaf(r):
    return ("leaf", r)


def _lam(a, b, k, normal):
    return ("lam", a, b, k, normal)


def _spec_cross():
    core_y = _lam(_leaf(0), _lam(_leaf(1), _leaf(2), 1, "y"), 0, "y")
    core_x = _lam(_leaf(0), _lam(_leaf(1), _leaf(2), 4, "x"), 3, "x")
    return _lam(_lam(core_y, _leaf(1), 2, "x"), core_x, 5, "y")


CATALOG = (
    ("void", _leaf(2)),
    ("k1", _leaf(0)),
    ("k2", _leaf(1)),
    ("L(1,2)", _lam(_leaf(0), _leaf(1), 0, "x")),
    ("L(1,3)", _lam(_leaf(0), _leaf(2), 0, "x")),
    ("L(12,1)", _lam(_lam(_leaf(0), _leaf(1), 0, "y"), _leaf(0), 1, "x")),
    ("L(13,1)", _lam(_lam(_leaf(0), _leaf(2), 0, "x"), _leaf(0), 1, "y")),
    ("L(13,2)", _lam(_lam(_leaf(0), _leaf(2), 0, "y"), _leaf(1), 1, "x")),
    ("L(13,2,1)", _lam(_lam(_lam(_leaf(0), _leaf(2), 0, "y"), _leaf(1), 1, "x"), _leaf(0), 2, "y")),
    ("L(13,2,13)", _spec_cross()),
)
LABELS = tuple(label for label, _ in CATALOG)


def _n_params(spec):
    if spec[0] == "leaf":
        return 0
    return max(spec[3] + 1, _n_params(spec[1]), _n_params(spec[2]))


def _roles(spec, acc=None):
    acc = set() if acc is None else acc
    if spec[0] == "leaf":
        acc.add(spec[1])
    else:
        _roles(spec[1], acc)
        _roles(spec[2], acc)
    return acc


def _series(f, a, b):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ta = np.where(f > 0, f / a, 0.0)
        tb = np.where(f < 1, (1.0 - f) / b, 0.0)
        return 1.0 / (ta + tb)


def _aligned(spec, P, stiff):
    """Diagonal stiffness (X, Y, S) and role fractions of a spec for parameter rows ``P``."""
    n = P.shape[0]
    if spec[0] == "leaf":
        c = np.full(n, stiff[spec[1]])
        m = np.zeros((n, 3))
        m[:, spec[1]] = 1.0
        return c, c, c, m
    Xa, Ya, Sa, ma = _aligned(spec[1], P, stiff)
    Xb, Yb, Sb, mb = _aligned(spec[2], P, stiff)
    f = P[:, spec[3]]
    par = lambda a, b: f * a + (1.0 - f) * b
    S = _series(f, Sa, Sb)
    if spec[4] == "x":
        X, Y = _series(f, Xa, Xb), par(Ya, Yb)
    else:
        X, Y = par(Xa, Xb), _series(f, Ya, Yb)
    return X, Y, S, f[:, None] * ma + (1.0 - f)[:, None] * mb


def _energy_diag(p, q, X, Y):
    with np.errstate(divide="ignore", invalid="ignore"):
        ex = np.where(p == 0.0, 0.0, p * p / X)
        ey = np.where(q == 0.0, 0.0, q * q / Y)
    return 0.5 * (ex + ey)


def _spec_to_node(spec, x, roles, frame):
    if spec[0] == "leaf":
        return Leaf(roles[spec[1]])
    angle = frame if spec[4] == "x" else frame + math.pi / 2
    return Lam(_spec_to_node(spec[1], x, roles, frame), _spec_to_node(spec[2], x, roles, frame),
               float(x[spec[3]]), _wrap(angle))


def _role_map(phases: PhaseSet):
    n = len(phases)
    if n == 3:
        return (0, 1, 2)
    if n == 2:
        return (0, None, 1) if phases.phases[1].is_void else (0, 1, None)
    if n == 1:
        return (0, None, None)
    raise LaminateError("the laminate catalog handles at most three phases")


@dataclass
class CatalogChoice:
    value: float
    structure: object
    label: str
    fractions: tuple
    energy: float
    params: tuple
    stiffness_diag: tuple = ()
    frame: float = 0.0


def _resolve_costs(phases, gamma):
    if gamma is None:
        return np.array(phases.costs, dtype=float)
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.size == 1 and len(phases) == 3:
        return np.array([1.0, float(g[0]), 0.0])
    if g.size != len(phases):
        raise LaminateError("need one cost per phase")
    return g


class _Problem:
    def __init__(self, phases, costs):
        self.roles = _role_map(phases)
        self.stiff = [0.0 if r is None else phases.phases[r].stiffness for r in self.roles]
        self.gam = np.array([0.0 if r is None else costs[r] for r in self.roles])
        self.n = len(phases)
        self.entries = [(lab, spec) for lab, spec in CATALOG
                        if all(self.roles[r] is not None for r in _roles(spec))]

    def batch(self, spec, P, p, q):
        X, Y, S, m = _aligned(spec, P, self.stiff)
        e = _energy_diag(p, q, X, Y)
        return e + m @ self.gam, e, X, Y, S, m

    def fractions(self, m_roles):
        out = np.zeros(self.n)
        for r, idx in enumerate(self.roles):
            if idx is not None:
                out[idx] += m_roles[r]
        return tuple(float(v) for v in out)


def _samples(k, rng, n_random, snap_p=0.2):
    if k == 0:
        return np.zeros((1, 0))
    if k == 1:
        return np.linspace(0.0, 1.0, 257)[:, None]
    P = rng.random((n_random, k))
    snap = rng.random((n_random, k)) < snap_p
    P[snap] = np.round(rng.random(int(snap.sum())))
    return P


def _directions(k):
    """Axis steps plus pairwise diagonals, so valleys along ``x_i +- x_j`` are followed."""
    dirs = [np.eye(k), -np.eye(k)]
    for i in range(k):
        for j in range(i + 1, k):
            for a in (1.0, -1.0):
                for b in (1.0, -1.0):
                    d = np.zeros(k)
                    d[i], d[j] = a, b
                    dirs.append(d[None, :])
    return np.vstack(dirs)


def _pattern_search(fun, X, h0=0.05, hmin=1e-9, max_sweeps=400):
    """Batched compass search on ``[0, 1]**k`` for several starting rows at once."""
    X = np.array(X, dtype=float)
    n, k = X.shape
    fX = fun(X)
    h = np.full(n, h0)
    E = _directions(k)
    for _ in range(max_sweeps):
        live = h > hmin
        if not live.any():
            break
        idx = np.flatnonzero(live)
        C = np.clip(X[idx, None, :] + h[idx, None, None] * E[None], 0.0, 1.0)
        fC = fun(C.reshape(-1, k)).reshape(len(idx), len(E))
        j = np.argmin(fC, axis=1)
        fbest = fC[np.arange(len(idx)), j]
        better = fbest < fX[idx]
        X[idx[better]] = C[np.flatnonzero(better), j[better]]
        fX[idx[better]] = fbest[better]
        h[idx[~better]] *= 0.5
    return X, fX


def best_in_catalog(phases: PhaseSet, sigma0: StressTensor, gamma=None, *, seed=0,
                    labels=None, n_random=2000, starts=8) -> CatalogChoice:
    """Cheapest catalog structure (energy plus material cost) under load ``sigma0``.

    ``gamma`` gives one cost per phase; a scalar is read as the normalised cost of the
    intermediate phase (strong 1, void 0). Layers are aligned with the principal axes of
    the load and both assignments of the axes are tried. Structures with one or two free
    fractions are searched by sampling plus a batched compass search; deeper ones by
    differential evolution, whose nested plateaus defeat local starts. The leading
    candidates get a final quasi-Newton polish. Near-ties (relative ``1e-7``) go to
    the simpler structure, in catalog order.
    """
    if sigma0.det < -1e-14 * max(sigma0.frob2, 1e-300):
        raise LaminateError("catalog search requires det(sigma0) >= 0")
    prob = _Problem(phases, _resolve_costs(phases, gamma))
    lam1, lam2, ang = eigen(sigma0)
    val, label, spec, x, swapped = _search(prob, lam2, lam1, seed, labels, n_random, starts)
    p, q, th = (lam1, lam2, ang + math.pi / 2) if swapped else (lam2, lam1, ang)
    tot, e, X, Y, S, m = prob.batch(spec, np.atleast_2d(x), p, q)
    node = _spec_to_node(spec, x, prob.roles, th)
    return CatalogChoice(float(tot[0]), node, label, prob.fractions(m[0]), float(e[0]),
                         tuple(float(v) for v in x), (float(X[0]), float(Y[0]), float(S[0])),
                         _wrap(th))


def diagonal_choice(phases: PhaseSet, gamma, a, b, *, seed=0):
    """Catalog optimum for the load ``diag(a, b)`` in its own frame (any signs allowed).

    Returns ``(value, label, (X, Y, S), fractions)`` with the diagonal Mandel stiffness
    expressed in the frame of the load. Aligned laminates only see ``|a|`` and ``|b|``,
    so this also serves loads with ``det < 0``, where the catalog is an upper bound only.
    """
    prob = _Problem(phases, _resolve_costs(phases, gamma))
    val, label, spec, x, swapped = _search(prob, a, b, seed, None, 2000, 8)
    p, q = (b, a) if swapped else (a, b)
    tot, e, X, Y, S, m = prob.batch(spec, np.atleast_2d(x), p, q)
    X, Y = (Y, X) if swapped else (X, Y)
    return float(tot[0]), label, (float(X[0]), float(Y[0]), float(S[0])), prob.fractions(m[0])


def _search(prob, p0, q0, seed, labels, n_random, starts):
    frames = ((p0, q0), (q0, p0))
    results = []
    for label, spec in prob.entries:
        if labels is not None and label not in labels:
            continue
        k = _n_params(spec)
        P = _samples(k, np.random.default_rng([seed, LABELS.index(label)]), n_random)
        for oi, (p, q) in enumerate(frames):
            if oi == 1 and (k == 0 or abs(p) == abs(q)):
                continue
            fun = _capped(prob, spec, p, q)
            if k >= 3:
                rng = np.random.default_rng([seed, LABELS.index(label), oi])
                r = differential_evolution(lambda X: fun(X.T), [(0.0, 1.0)] * k, vectorized=True,
                                           updating="deferred", popsize=10, tol=1e-8,
                                           maxiter=1000, polish=True, seed=rng)
                x = np.clip(r.x, 0.0, 1.0)
                results.append([float(fun(x[None])[0]), label, spec, oi, x])
                continue
            tot = fun(P)
            if k == 0:
                results.append([float(tot[0]), label, spec, oi, P[0]])
                continue
            top = _diverse(P, tot, starts)
            X, fX = _pattern_search(fun, top)
            b = int(np.argmin(fX))
            results.append([float(fX[b]), label, spec, oi, X[b]])
    vmin = min(r[0] for r in results)
    if vmin >= _CAP:
        raise LaminateError("no catalog structure carries this load")
    for r in results:
        if len(r[4]) and r[0] <= vmin + 1e-3 * abs(vmin) + 1e-12:
            p, q = frames[r[3]]
            x, v = _refine(prob, r[2], r[4], p, q)
            if v < r[0]:
                r[0], r[4] = v, x
    order = {lab: i for i, lab in enumerate(LABELS)}
    vmin = min(r[0] for r in results)
    tie = 1e-7 * max(abs(vmin), 1e-12)
    val, label, spec, oi, x = min((r for r in results if r[0] <= vmin + tie), key=lambda r: order[r[1]])
    return val, label, spec, x, oi == 1


_CAP = 1e30


def _diverse(P, f, n, radius=0.1):
    """Best ``n`` rows of ``P`` by ``f``, skipping rows within ``radius`` of a chosen one."""
    chosen = []
    for i in np.argsort(f, kind="stable"):
        if f[i] >= _CAP:
            break
        if all(np.max(np.abs(P[i] - P[j])) > radius for j in chosen):
            chosen.append(i)
            if len(chosen) == n:
                break
    return P[chosen] if chosen else P[:1]


def _capped(prob, spec, p, q):
    def fun(P):
        v = prob.batch(spec, P, p, q)[0]
        return np.where(np.isfinite(v), np.minimum(v, _CAP), _CAP)
    return fun


def _refine(prob, spec, x0, p, q):
    batch = _capped(prob, spec, p, q)
    fun = lambda x: float(batch(x[None, :])[0])
    x0 = np.asarray(x0, float)
    r = minimize(fun, x0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * len(x0),
                 options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
    x = np.clip(r.x, 0.0, 1.0)
    v = fun(x)
    return (x, v) if v < fun(x0) else (x0, fun(x0))


def catalog_structure(label):
    for lab, spec in CATALOG:
        if lab == label:
            return spec
    raise LaminateError(f"unknown catalog label {label!r}")


def optimize_at_fractions(label, phases: PhaseSet, sigma0: StressTensor, fractions, *,
                          seed=0, starts=24):
    """Least energy of one catalog structure whose phase fractions are prescribed.

    Returns a :class:`CatalogChoice` with ``value == energy`` (costs are irrelevant here).
    """
    spec = catalog_structure(label)
    prob = _Problem(phases, np.zeros(len(phases)))
    target = np.zeros(3)
    for r, idx in enumerate(prob.roles):
        if idx is not None:
            target[r] = fractions[idx]
    k = _n_params(spec)
    # independent fraction constraints: present roles except the last (they sum to one)
    free = [r for r, idx in enumerate(prob.roles) if idx is not None][:-1]
    lam1, lam2, ang = eigen(sigma0)
    rng = np.random.default_rng(seed)
    best = None
    for p, q, th in ((lam2, lam1, ang), (lam1, lam2, ang + math.pi / 2)):
        def fun(x):
            v = prob.batch(spec, x[None, :], p, q)[1][0]
            return float(v) if np.isfinite(v) else 1e30

        def eq(x):
            return (_aligned(spec, x[None, :], prob.stiff)[3][0] - target)[free]

        P = _samples(k, rng, 4000)
        m = _aligned(spec, P, prob.stiff)[3]
        miss = np.abs(m - target).sum(axis=1)
        e = prob.batch(spec, P, p, q)[1]
        score = np.where(np.isfinite(e), e, 1e30) + 1e3 * miss
        for x0 in P[np.argsort(score)[:starts]]:
            r = minimize(fun, x0, method="SLSQP", bounds=[(0.0, 1.0)] * k,
                         constraints=[{"type": "eq", "fun": eq}],
                         options={"ftol": 1e-15, "maxiter": 1000})
            x = np.clip(r.x, 0.0, 1.0)
            if np.max(np.abs(eq(x))) > 1e-9:
                continue
            v = fun(x)
            if best is None or v < best[0]:
                best = (v, x, th, p, q)
    if best is None:
        raise LaminateError(f"{label} cannot realise fractions {fractions}")
    v, x, th, p, q = best
    tot, e, X, Y, S, m = prob.batch(spec, x[None, :], p, q)
    node = _spec_to_node(spec, x, prob.roles, th)
    return CatalogChoice(float(e[0]), node, label, prob.fractions(m[0]), float(e[0]),
                         tuple(float(t) for t in x), (float(X[0]), float(Y[0]), float(S[0])), _wrap(th))


def regime_map(phases: PhaseSet, gamma, lam1_values, lam2_values, *, seed=0, n_random=1500):
    """Winning catalog label on a grid of principal stresses ``diag(l1, l2)``.

    Returns an object array of shape ``(len(lam1_values), len(lam2_values))``.
    """
    l1 = np.asarray(lam1_values, dtype=float)
    l2 = np.asarray(lam2_values, dtype=float)
    out = np.empty((len(l1), len(l2)), dtype=object)
    for i, a in enumerate(l1):
        for j, b in enumerate(l2):
            if a * b < 0:
                raise LaminateError("regime map needs principal stresses of equal sign")
            if a == 0 and b == 0:
                out[i, j] = "void" if _role_map(phases)[2] is not None else "k1"
                continue
            out[i, j] = best_in_catalog(phases, StressTensor(a, b, 0.0), gamma,
                                        seed=seed, n_random=n_random).label
    return out
