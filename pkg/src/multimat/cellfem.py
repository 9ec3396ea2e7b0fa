"""Periodic unit-cell homogenisation on pixel grids with bilinear quadrilaterals.

Each pixel is one square element carrying the zero-Poisson law ``sigma = eps / kappa``.
Three average-strain load cases give the effective stiffness, returned as a
:class:`~multimat.laminate.ComplianceMap` in Mandel coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bounds import PhaseSet, hs_bound
from .laminate import ComplianceMap, Lam, Leaf, optimize_at_fractions
from .tensor import StressTensor

VOID_FACTOR = 1e6
# Voigt <-> Mandel: D_voigt = T C_mandel T with T = diag(1, 1, 1/sqrt 2)
_T = np.diag([1.0, 1.0, 1.0 / math.sqrt(2.0)])
_TINV = np.diag([1.0, 1.0, math.sqrt(2.0)])


class CellError(ValueError):
    pass


# ------------------------------------------------------------------- Q4 element data


def _q4_B(xi, eta):
    dN_dxi = np.array([-(1 - eta), (1 - eta), eta, -eta])
    dN_deta = np.array([-(1 - xi), -xi, xi, (1 - xi)])
    B = np.zeros((3, 8))
    B[0, 0::2] = dN_dxi
    B[1, 1::2] = dN_deta
    B[2, 0::2] = dN_deta
    B[2, 1::2] = dN_dxi
    return B


def _gauss_Bs():
    g = 0.5 / math.sqrt(3.0)
    return [_q4_B(0.5 + a, 0.5 + b) for a in (-g, g) for b in (-g, g)]


GAUSS_B = np.array(_gauss_Bs())  # (4, 3, 8), unit square, equal weights 1/4
# K_BASIS[a, b] = int B_a^T B_b over the unit element; Ke = sum_ab D_ab K_BASIS[a, b].
# In 2D the element stiffness does not depend on the element size.
K_BASIS = 0.25 * np.einsum("gai,gbj->abij", GAUSS_B, GAUSS_B)
B_MEAN = GAUSS_B.mean(axis=0)  # int B over the unit element


def element_stiffness(D):
    """Stiffness of square elements for Voigt material matrices ``D`` of shape (..., 3, 3)."""
    return np.einsum("...ab,abij->...ij", D, K_BASIS)


def voigt_from_mandel(C):
    return _T @ C @ _T


def mandel_from_voigt(D):
    return _TINV @ D @ _TINV


# ----------------------------------------------------------------------- cell grids


@dataclass
class CellGrid:
    """Pixel phase map ``cells[row, col]``; row index grows with ``y``, column with ``x``."""

    cells: np.ndarray
    kappas: tuple

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64)
        if self.cells.ndim != 2 or min(self.cells.shape) < 8:
            raise CellError("cell grids must be 2D with at least 8 pixels per side")
        self.kappas = tuple(float(k) for k in self.kappas)
        if self.cells.min() < 0 or self.cells.max() >= len(self.kappas):
            raise CellError("pixel phase index outside the phase table")

    @property
    def ny(self):
        return self.cells.shape[0]

    @property
    def nx(self):
        return self.cells.shape[1]

    def fractions(self):
        return np.bincount(self.cells.ravel(), minlength=len(self.kappas)) / self.cells.size

    def stiffness_values(self, void_factor=VOID_FACTOR):
        finite = [k for k in self.kappas if math.isfinite(k)]
        if not finite:
            raise CellError("all phases are void")
        kv = void_factor * max(finite)
        return np.array([1.0 / (k if math.isfinite(k) else kv) for k in self.kappas])


def _is_axis(angle):
    c, s = abs(math.cos(angle)), abs(math.sin(angle))
    if c < 1e-12:
        return "y"
    if s < 1e-12:
        return "x"
    return None


def rasterize_laminate(node, kappas, n, refine=8):
    """Pixelate a laminate tree; each nesting level is ``refine`` times finer than its parent.

    Only layers normal to x or y are periodic on a square pixel grid.
    """
    y, x = np.mgrid[0:n, 0:n]
    cells = np.empty((n, n), dtype=np.int64)

    def fill(node, mask, level):
        if isinstance(node, Leaf):
            cells[mask] = node.phase
            return
        axis = _is_axis(node.angle)
        if axis is None:
            raise CellError("only axis-aligned layers can be rasterised")
        period = n // refine ** level
        if period < 2:
            raise CellError(f"resolution {n} too coarse for a depth-{level + 1} laminate")
        coord = (x if axis == "x" else y) % period
        na = int(round(node.f * period))
        fill(node.a, mask & (coord < na), level + 1)
        fill(node.b, mask & (coord >= na), level + 1)

    fill(node, np.ones((n, n), dtype=bool), 0)
    return CellGrid(cells, kappas)


def rasterize_coated_circles(core, coat, m_core, n, kappas, levels=2):
    """Coated disks of ``core`` inside ``coat`` on a periodic square cell.

    ``levels=1`` is a single centred disk. ``levels=2`` also fills the corner gap with a
    smaller coated disk of the same core-to-coat ratio, a first step towards the
    space-filling coated-circle assemblage.
    """
    outer = [(0.5, 0.5, 0.5)]
    if levels == 2:
        outer.append((0.0, 0.0, math.sqrt(0.5) - 0.5))
    elif levels != 1:
        raise CellError("levels must be 1 or 2")
    area = math.pi * sum(R * R for _, _, R in outer)
    if not 0.0 <= m_core <= area:
        raise CellError(f"core fraction {m_core} infeasible; these disks hold at most {area:.6f}")
    ratio = math.sqrt(m_core / area)
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c)
    inside = np.zeros((n, n), dtype=bool)
    for cx, cy, R in outer:
        dx = np.abs(X - cx)
        dy = np.abs(Y - cy)
        dx, dy = np.minimum(dx, 1 - dx), np.minimum(dy, 1 - dy)
        inside |= dx * dx + dy * dy < (ratio * R) ** 2
    cells = np.where(inside, core, coat)
    got = float(np.mean(inside))
    if abs(got - m_core) > 2.0 / n:
        raise CellError(f"core fraction {m_core} not reachable at n={n}; achievable {got}")
    return CellGrid(cells, kappas)


def rasterize(kind, n, **kw):
    """Dispatch on ``kind`` in ``{"laminate", "coated_circles", "image"}``."""
    if kind == "laminate":
        return rasterize_laminate(kw["node"], kw["kappas"], n, kw.get("refine", 8))
    if kind == "coated_circles":
        return rasterize_coated_circles(kw["core"], kw["coat"], kw["m_core"], n, kw["kappas"],
                                        kw.get("levels", 2))
    if kind == "image":
        g = load_pgm(kw["path"], kw["kappas"])
        if g.nx != n or g.ny != n:
            raise CellError(f"image is {g.nx}x{g.ny}, expected {n}x{n}")
        return g
    raise CellError(f"unknown rasterisation kind {kind!r}")


# ------------------------------------------------------------------------ PGM I/O

GRAY = (0, 128, 255)


def save_pgm(grid: CellGrid, path):
    if len(grid.kappas) > 3:
        raise CellError("PGM encoding supports at most three phases")
    img = np.asarray(GRAY, dtype=np.uint8)[grid.cells]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.nx} {grid.ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _read_header_tokens(data, count):
    tokens, pos = [], 2
    while len(tokens) < count:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(int(data[pos:end]))
        pos = end
    return tokens, pos + 1


def load_pgm(path, kappas):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise CellError("not a binary PGM (P5) file")
    (w, h, maxval), pos = _read_header_tokens(data, 3)
    if maxval != 255:
        raise CellError("only maxval 255 is supported")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    lut = np.full(256, -1, dtype=np.int64)
    for i, g in enumerate(GRAY):
        lut[g] = i
    cells = lut[img]
    if cells.min() < 0:
        raise CellError("image holds gray levels outside {0, 128, 255}")
    return CellGrid(cells, kappas)


# --------------------------------------------------------------------- homogenise


def _periodic_dofs(nx, ny):
    j, i = np.mgrid[0:ny, 0:nx]
    node = lambda a, b: (b % ny) * nx + (a % nx)
    nodes = np.stack([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)], axis=-1)
    nodes = nodes.reshape(-1, 4)
    edof = np.empty((nodes.shape[0], 8), dtype=np.int64)
    edof[:, 0::2] = 2 * nodes
    edof[:, 1::2] = 2 * nodes + 1
    return edof


def assemble(edof, Ke, ndof):
    rows = np.broadcast_to(edof[:, :, None], Ke.shape).ravel()
    cols = np.broadcast_to(edof[:, None, :], Ke.shape).ravel()
    return sp.csc_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof))


def homogenize(grid: CellGrid, *, solver="direct", void_factor=VOID_FACTOR, rtol=1e-9) -> ComplianceMap:
    """Effective stiffness of a periodic pixel cell from three average-strain loadings."""
    ny, nx = grid.cells.shape
    c = grid.stiffness_values(void_factor)[grid.cells.ravel()]
    D0 = np.diag([1.0, 1.0, 0.5])  # Voigt form of the unit isotropic zero-Poisson law
    D = c[:, None, None] * D0
    Ke = element_stiffness(D)
    edof = _periodic_dofs(nx, ny)
    ndof = 2 * nx * ny
    K = assemble(edof, Ke, ndof)
    free = np.arange(2, ndof)  # node 0 pinned
    Kf = K[free][:, free].tocsc()
    E = np.eye(3)
    # f_e = -(int B)^T D E for each unit strain
    fe = -np.einsum("ai,eab,bk->eik", B_MEAN, D, E)
    F = np.zeros((ndof, 3))
    np.add.at(F, edof.ravel(), fe.reshape(-1, 3))
    U = np.zeros((ndof, 3))
    if solver == "direct":
        U[free] = spla.splu(Kf).solve(F[free])
    elif solver == "cg":
        maxiter = 20 * nx * ny
        diag = Kf.diagonal()
        M = sp.diags(1.0 / diag)
        for k in range(3):
            b = F[free, k]
            x, info = spla.cg(Kf, b, rtol=rtol, maxiter=maxiter, M=M)
            if info != 0:
                raise CellError(f"conjugate gradients did not converge in {maxiter} iterations")
            U[free, k] = x
    else:
        raise CellError(f"unknown solver {solver!r}")
    Ue = U[edof]  # (ne, 8, 3)
    strain = np.einsum("ai,eik->eak", B_MEAN, Ue) + E[None]
    stress = np.einsum("eab,ebk->eak", D, strain)
    Cv = stress.mean(axis=0)
    Cv = 0.5 * (Cv + Cv.T)
    return ComplianceMap(mandel_from_voigt(Cv))


def isotropic_compliance(cmap: ComplianceMap):
    return cmap.energy(StressTensor(1.0, 1.0, 0.0))


def layer_frame_compliance(cmap: ComplianceMap, angle):
    """Compliance entries (nn, nt, tt) in the frame of a layer normal at ``angle``."""
    K = cmap.rotated(-angle).compliance
    return K[0, 0], K[2, 2], K[1, 1]


# -------------------------------------------------------------------- attainability


def attainability_report(config=None):
    """Compare closed-form bounds, optimised laminates and FEM on a few test structures.

    ``config`` keys: ``kappa`` (two finite compliances), ``m_coat`` (strong fraction of
    the coated circles), ``m_lam`` (strong fraction of the two-phase laminate), ``n``.
    Returns a list of row dicts with relative gaps.
    """
    cfg = {"kappa": (1.0, 2.0), "m_coat": 0.5, "m_lam": 0.5, "n": 128}
    cfg.update(config or {})
    k1, k2 = (float(k) for k in cfg["kappa"])
    n = int(cfg["n"])
    rows = []
    iso = StressTensor(1.0, 1.0, 0.0)

    g = CellGrid(np.zeros((n, n), dtype=np.int64), (k1,))
    fem = isotropic_compliance(homogenize(g))
    rows.append(_row("k1", k1, k1, fem))

    m = float(cfg["m_coat"])
    void = PhaseSet.from_lists([k1, math.inf], [m, 1.0 - m])
    bound = hs_bound(void)
    cat = optimize_at_fractions("L(13,1)", void, iso, (m, 1.0 - m)).value
    g = rasterize_coated_circles(1, 0, 1.0 - m, n, (k1, math.inf), levels=2)
    rows.append(_row("HS(13)", bound, cat, isotropic_compliance(homogenize(g))))
    g = rasterize_coated_circles(1, 0, 1.0 - m, n, (k1, math.inf), levels=1)
    rows.append(_row("HS(13) single disk", bound, cat, isotropic_compliance(homogenize(g))))

    m = float(cfg["m_lam"])
    two = PhaseSet.from_lists([k1, k2], [m, 1.0 - m])
    choice = optimize_at_fractions("L(12,1)", two, iso, (m, 1.0 - m))
    g = rasterize_laminate(choice.structure, (k1, k2), n)
    rows.append(_row("L(12,1)", hs_bound(two), choice.value, isotropic_compliance(homogenize(g))))
    return rows


def _row(name, bound, catalog, fem):
    rel = lambda a, b: abs(a - b) / abs(b)
    return {
        "structure": name,
        "bound": bound,
        "catalog": catalog,
        "fem": fem,
        "gap_bound_catalog": rel(catalog, bound),
        "gap_catalog_fem": rel(fem, catalog),
        "gap_bound_fem": rel(fem, bound),
    }
