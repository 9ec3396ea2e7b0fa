"""Relaxed multimaterial compliance design of a plane cantilever.

The objective is ``0.5 f.u + sum_e A_e gamma . m_e``. Each iteration solves the elastic
problem for the current element stiffnesses, then picks per element the catalog
structure minimising ``0.5 tr(K M_e) + gamma . m`` and moves a damped step towards it.

``M_e`` is built from the element-averaged stress by default. With
``stress_measure="moment"`` it is the Gauss-point second moment of the stress instead;
then the displacement solution's stress minimises the complementary energy over
discretely equilibrated fields, so the alternating step provably never increases the
objective (damping in stiffness is safe because the inverse is operator convex). The
moment variant rejects every structure with a zero shear stiffness (aligned laminates
with void), so it cannot open up near-void regions; the mean variant can.
"""

from __future__ import annotations

import csv
import functools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla
from scipy import ndimage

from .bounds import PhaseSet, hs_bound
from .cellfem import GAUSS_B, _TINV, assemble, element_stiffness, voigt_from_mandel
from .envelope import gamma_interval
from .laminate import LABELS, diagonal_choice
from .tensor import rotation_matrices

CONTRAST_PRESETS = {"low": (1.0, 2.0), "high": (1.0, 100.0)}

PALETTE = {
    "k1": (0, 0, 0),
    "L(13,2,13)": (0, 0, 255),
    "L(13,2,1)": (0, 255, 0),
    "L(12,1)": (255, 0, 0),
    "k2": (128, 128, 128),
    "void": (255, 255, 255),
}
OTHER_COLOR = (255, 165, 0)
# ordinal ranking from weakest to strongest, used by the display median filter
DISPLAY_ORDER = ("void", "L(1,3)", "L(13,2,13)", "L(13,1)", "L(13,2)", "L(13,2,1)", "k2", "L(1,2)",
                 "L(12,1)", "k1")


class TopoptError(RuntimeError):
    pass


@dataclass(frozen=True)
class DesignProblem:
    nx: int = 160
    ny: int = 80
    length: float = 2.0
    height: float = 1.0
    kappas: tuple = (1.0, 2.0, math.inf)
    costs: tuple | None = None
    force: float = 1.0
    # multiplies the default costs; with a unit force the stresses near the clamp are
    # O(10), so unscaled costs make the strong phase win almost everywhere
    cost_scale: float = 10.0
    damping: float = 0.3
    max_iter: int = 200
    tol: float = 1e-4
    regularization: float = 1e-6
    fast_path: bool = True
    stress_measure: str = "mean"
    mirrored: bool = False
    seed: int = 0
    table_r: int = 32
    table_phi: int = 6

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2 or self.ny % 2:
            raise TopoptError("need nx >= 2 and an even ny >= 2 so the load sits on a node")
        if not 0 < self.damping <= 1:
            raise TopoptError("damping must lie in (0, 1]")
        if self.stress_measure not in ("mean", "moment"):
            raise TopoptError("stress_measure must be 'mean' or 'moment'")
        if self.force == 0:
            raise TopoptError("at least one nonzero load is required")
        PhaseSet.from_lists(self.kappas)  # validates ordering

    @classmethod
    def preset(cls, contrast="low", **kw):
        k1, k2 = CONTRAST_PRESETS[contrast]
        ga, gb = gamma_interval(k1, k2)
        c = kw.pop("cost_scale", cls.cost_scale)
        return cls(kappas=(k1, k2, math.inf), costs=(c, c * 0.5 * (ga + gb), 0.0), **kw)

    @property
    def phase_costs(self):
        if self.costs is not None:
            return tuple(float(c) for c in self.costs)
        if len(self.kappas) == 3:
            ga, gb = gamma_interval(self.kappas[0], self.kappas[1])
            return (self.cost_scale, self.cost_scale * 0.5 * (ga + gb), 0.0)
        return tuple([self.cost_scale] + [0.0] * (len(self.kappas) - 1))

    @property
    def h(self):
        return self.length / self.nx


def mirror_problem(problem: DesignProblem) -> DesignProblem:
    """Reflect the problem about the horizontal mid-line (the load direction flips)."""
    return replace(problem, mirrored=not problem.mirrored)


@dataclass
class DesignField:
    nx: int
    ny: int
    fractions: np.ndarray  # (ny, nx, n_phases), row 0 at the bottom
    labels: np.ndarray  # (ny, nx) object array
    stiffness: np.ndarray  # (ny, nx, 3, 3) Mandel
    objective: float = math.nan
    converged: bool = False
    info: dict = field(default_factory=dict)


# ------------------------------------------------------------------- finite elements


class _Mesh:
    def __init__(self, problem: DesignProblem):
        nx, ny = problem.nx, problem.ny
        self.nx, self.ny = nx, ny
        self.h = problem.h
        if abs(problem.height / ny - self.h) > 1e-12 * self.h:
            raise TopoptError("elements must be square: length/nx == height/ny")
        j, i = np.mgrid[0:ny, 0:nx]
        node = lambda a, b: b * (nx + 1) + a
        nodes = np.stack([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)], -1).reshape(-1, 4)
        self.edof = np.empty((nx * ny, 8), dtype=np.int64)
        self.edof[:, 0::2] = 2 * nodes
        self.edof[:, 1::2] = 2 * nodes + 1
        self.ndof = 2 * (nx + 1) * (ny + 1)
        fixed = np.concatenate([2 * node(0, np.arange(ny + 1)), 2 * node(0, np.arange(ny + 1)) + 1])
        self.free = np.setdiff1d(np.arange(self.ndof), fixed)
        self.f = np.zeros(self.ndof)
        sign = 1.0 if problem.mirrored else -1.0
        self.f[2 * node(nx, ny // 2) + 1] = sign * problem.force
        self.area = self.h * self.h

    def solve(self, C):
        """Displacements and Gauss-point Mandel stresses for element stiffnesses ``C``."""
        D = voigt_from_mandel_batch(C)
        K = assemble(self.edof, element_stiffness(D), self.ndof)
        Kf = K[self.free][:, self.free].tocsc()
        u = np.zeros(self.ndof)
        try:
            u[self.free] = spla.spsolve(Kf, self.f[self.free])
        except RuntimeError as exc:
            raise TopoptError(f"singular global stiffness: {exc}") from exc
        if not np.all(np.isfinite(u)):
            raise TopoptError("singular global stiffness (void blocks the load path)")
        ue = u[self.edof] / self.h  # unit-element B scaled to the physical size
        strain_v = np.einsum("gai,ei->ega", GAUSS_B, ue)
        stress_v = np.einsum("eab,egb->ega", D, strain_v)
        stress_m = stress_v @ _TINV.T
        return u, stress_m


def voigt_from_mandel_batch(C):
    T = np.diag([1.0, 1.0, 1.0 / math.sqrt(2.0)])
    return T @ C @ T


# ------------------------------------------------------------------- catalog table


@functools.lru_cache(maxsize=8)
def _catalog_table(kappas, costs, r_values, n_phi, seed):
    """Catalog optima on a grid of principal-stress magnitudes ``(R cos phi, R sin phi)``.

    ``phi`` runs over ``[0, pi/4]``, the fundamental domain of aligned laminates.
    """
    phases = PhaseSet.from_lists(list(kappas))
    phis = np.linspace(0.0, math.pi / 4, n_phi)
    nr = len(r_values)
    diag = np.zeros((nr, n_phi, 3))
    frac = np.zeros((nr, n_phi, len(kappas)))
    labels = np.empty((nr, n_phi), dtype=object)
    for i, r in enumerate(r_values):
        for j, phi in enumerate(phis):
            _, lab, d, m = diagonal_choice(phases, list(costs), r * math.cos(phi), r * math.sin(phi), seed=seed)
            diag[i, j], frac[i, j], labels[i, j] = d, m, lab
    return phis, diag, frac, labels


def _table_radii(problem, n):
    """Log-spaced stress magnitudes around the scale where material cost and energy balance."""
    g = max(problem.phase_costs)
    scale = math.sqrt(max(g, 1e-12) / problem.kappas[0])
    return tuple(np.geomspace(1e-2 * scale, 30.0 * scale, n).tolist())


# ------------------------------------------------------------------------ optimizer


def _local_values(Kdiag_or_full, M, m, gam, full=False):
    if full:
        return 0.5 * np.einsum("eij,eji->e", Kdiag_or_full, M) + m @ gam
    return 0.5 * np.einsum("ej,ej->e", Kdiag_or_full, M) + m @ gam


def solve_design(problem: DesignProblem, *, callback=None):
    """Alternating minimisation with damping; returns ``(DesignField, history)``."""
    mesh = _Mesh(problem)
    n_el = problem.nx * problem.ny
    kap = problem.kappas
    nph = len(kap)
    gam = np.asarray(problem.phase_costs, dtype=float)
    if len(gam) != nph:
        raise TopoptError("one cost per phase is required")
    stiff = np.array([0.0 if math.isinf(k) else 1.0 / k for k in kap])
    delta = problem.regularization / kap[0]
    eye = np.eye(3)
    radii = _table_radii(problem, problem.table_r)
    phis, tdiag, tfrac, tlab = _catalog_table(tuple(kap), tuple(gam), radii, problem.table_phi, problem.seed)
    logr = np.log(radii)

    C = np.broadcast_to(stiff[0] * eye, (n_el, 3, 3)).copy()
    m = np.zeros((n_el, nph))
    m[:, 0] = 1.0
    labels = np.full(n_el, "k1", dtype=object)
    history = []
    best = None
    converged = False
    pure = [(f"k{i + 1}" if math.isfinite(kap[i]) else "void", i) for i in range(nph)]

    for it in range(problem.max_iter + 1):
        u, tau = mesh.solve(C + delta * eye)
        compliance = 0.5 * float(mesh.f @ u)
        J = compliance + mesh.area * float(np.sum(m @ gam))
        history.append(J)
        if best is None or J <= best[0]:
            best = (J, C.copy(), m.copy(), labels.copy())
        if callback is not None:
            callback(it, J)
        if it >= 1 and abs(history[-2] - J) <= problem.tol * abs(J):
            converged = True
            break
        if it == problem.max_iter:
            break

        tbar = tau.mean(axis=1)
        if problem.stress_measure == "mean":
            M = np.einsum("ea,eb->eab", tbar, tbar)
        else:
            M = np.einsum("ega,egb->eab", tau, tau) / tau.shape[1]
        # current design
        Kcur = np.linalg.inv(C + delta * eye)
        v_cur = _local_values(Kcur, M, m, gam, full=True)
        best_v = v_cur.copy()
        best_C = C.copy()
        best_m = m.copy()
        best_lab = labels.copy()

        def consider(v, Cc, mc, lab):
            better = v < best_v
            if np.any(better):
                best_v[better] = v[better]
                best_C[better] = Cc[better] if Cc.ndim == 3 else Cc
                best_m[better] = mc[better] if mc.ndim == 2 else mc
                best_lab[better] = lab[better] if isinstance(lab, np.ndarray) else lab

        for name, i in pure:
            Ci = stiff[i] * eye
            Ki = np.diag(1.0 / (np.full(3, stiff[i]) + delta))
            mi = np.zeros(nph)
            mi[i] = 1.0
            v = 0.5 * np.einsum("ij,eji->e", Ki, M) + gam[i]
            consider(v, Ci, mi, name)

        # principal frame of the mean stress: x along the larger |eigenvalue|
        a = 0.5 * (tbar[:, 0] + tbar[:, 1])
        bdev = 0.5 * (tbar[:, 0] - tbar[:, 1])
        c = tbar[:, 2] / math.sqrt(2.0)
        rad = np.hypot(bdev, c)
        lam_hi, lam_lo = a + rad, a - rad
        theta = 0.5 * np.arctan2(c, bdev)  # direction of lam_hi
        swap = np.abs(lam_lo) > np.abs(lam_hi)
        theta = np.where(swap, theta + 0.5 * math.pi, theta)
        big = np.where(swap, np.abs(lam_lo), np.abs(lam_hi))
        small = np.where(swap, np.abs(lam_hi), np.abs(lam_lo))
        R = np.hypot(big, small)
        phi = np.arctan2(small, big)
        Rot = rotation_matrices(theta)
        Mf = np.einsum("eji,ejk,ekl->eil", Rot, M, Rot)  # M in the element frame
        Mdiag = np.stack([Mf[:, 0, 0], Mf[:, 1, 1], Mf[:, 2, 2]], axis=1)

        ri = np.interp(np.log(np.maximum(R, 1e-300)), logr, np.arange(len(logr)))
        pj = np.interp(phi, phis, np.arange(len(phis)))
        iso = np.abs(small / np.maximum(big, 1e-300) - 1.0) < 0.05
        for di in (0, 1):
            for dj in (0, 1):
                I = np.clip(np.floor(ri).astype(int) + di, 0, len(logr) - 1)
                Jj = np.clip(np.floor(pj).astype(int) + dj, 0, len(phis) - 1)
                if problem.fast_path:
                    Jj = np.where(iso, len(phis) - 1, Jj)
                d = tdiag[I, Jj]
                v = _local_values(1.0 / (d + delta), Mdiag, tfrac[I, Jj], gam)
                Cc = np.einsum("eij,ej,ekj->eik", Rot, d, Rot)
                consider(v, Cc, tfrac[I, Jj], tlab[I, Jj])

        if np.any(best_v > v_cur + 1e-12 * np.abs(v_cur)):
            raise TopoptError("local step increased the local energy")
        w = problem.damping
        C = (1.0 - w) * C + w * best_C
        m = (1.0 - w) * m + w * best_m
        labels = best_lab

    J, C, m, labels = best
    if not converged:
        warnings.warn("design iteration did not reach the tolerance; returning the best iterate")
    design = DesignField(problem.nx, problem.ny, m.reshape(problem.ny, problem.nx, nph),
                         labels.reshape(problem.ny, problem.nx),
                         C.reshape(problem.ny, problem.nx, 3, 3), J, converged,
                         {"iterations": len(history) - 1})
    return design, history


def uniform_objective(problem: DesignProblem, C, m):
    """Objective of a constant design with Mandel stiffness ``C`` and fractions ``m``."""
    mesh = _Mesh(problem)
    n_el = problem.nx * problem.ny
    delta = problem.regularization / problem.kappas[0]
    Cs = np.broadcast_to(np.asarray(C) + delta * np.eye(3), (n_el, 3, 3))
    u, _ = mesh.solve(np.array(Cs))
    gam = np.asarray(problem.phase_costs)
    return 0.5 * float(mesh.f @ u) + mesh.area * n_el * float(np.asarray(m) @ gam)


def baselines(problem: DesignProblem):
    """Uniform strong phase, uniform intermediate phase, and a 50/50 isotropic mix."""
    k = problem.kappas
    out = {}
    m = np.zeros(len(k))
    m[0] = 1.0
    out["k1"] = uniform_objective(problem, np.eye(3) / k[0], m)
    if len(k) >= 2 and math.isfinite(k[1]):
        m = np.zeros(len(k))
        m[1] = 1.0
        out["k2"] = uniform_objective(problem, np.eye(3) / k[1], m)
        m = np.zeros(len(k))
        m[0] = m[1] = 0.5
        kap = hs_bound(PhaseSet.from_lists(list(k[:2]), [0.5, 0.5]))
        out["mix50"] = uniform_objective(problem, np.eye(3) / kap, m)
    return out


# -------------------------------------------------------------------------- export


def _median_labels(labels):
    rank = {lab: i for i, lab in enumerate(DISPLAY_ORDER)}
    codes = np.vectorize(lambda s: rank.get(s, len(DISPLAY_ORDER)))(labels)
    back = np.array(list(DISPLAY_ORDER) + ["other"], dtype=object)
    return back[ndimage.median_filter(codes, size=3, mode="nearest")]


def regime_image(labels):
    """RGB array with the top row of the domain first."""
    rgb = np.array([[PALETTE.get(s, OTHER_COLOR) for s in row] for row in labels], dtype=np.uint8)
    return rgb[::-1]


def write_ppm(rgb, path):
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def fmt(x):
    return format(float(x), ".17g")


def export_design(design: DesignField, path, history=None, filtered=True):
    """Write ``<path>.ppm``, ``<path>_fractions.csv`` and optional history/filtered files."""
    path = str(path)
    base = path[:-4] if path.endswith(".ppm") else path
    written = [base + ".ppm"]
    write_ppm(regime_image(design.labels), base + ".ppm")
    if filtered:
        write_ppm(regime_image(_median_labels(design.labels)), base + "_filtered.ppm")
        written.append(base + "_filtered.ppm")
    nph = design.fractions.shape[-1]
    with open(base + "_fractions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ix", "iy"] + [f"m{i + 1}" for i in range(nph)] + ["label"])
        for iy in range(design.ny):
            for ix in range(design.nx):
                w.writerow([ix, iy] + [fmt(v) for v in design.fractions[iy, ix]] + [design.labels[iy, ix]])
    written.append(base + "_fractions.csv")
    if history is not None:
        with open(base + "_history.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective"])
            for i, J in enumerate(history):
                w.writerow([i, fmt(J)])
        written.append(base + "_history.csv")
    return written
