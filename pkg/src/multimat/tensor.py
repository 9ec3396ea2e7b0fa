"""Symmetric 2x2 stress tensors.

Vectors of stress components use Mandel ordering ``(sxx, syy, sqrt(2) * sxy)``, so the
Euclidean norm of the vector equals the Frobenius norm of the tensor and rotations act
orthogonally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class StressTensor:
    sxx: float
    syy: float
    sxy: float = 0.0

    @classmethod
    def diag(cls, a, b):
        return cls(float(a), float(b), 0.0)

    @classmethod
    def isotropic(cls, s):
        """Hydrostatic tensor ``s * I``."""
        return cls(float(s), float(s), 0.0)

    @classmethod
    def from_mandel(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]) / SQRT2)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[1, 1]), 0.5 * float(m[0, 1] + m[1, 0]))

    @classmethod
    def from_eigen(cls, lam1, lam2, angle):
        """Tensor with eigenvalue ``lam2`` along ``angle`` and ``lam1`` orthogonal to it."""
        c, s = math.cos(angle), math.sin(angle)
        return cls(lam2 * c * c + lam1 * s * s, lam2 * s * s + lam1 * c * c, (lam2 - lam1) * c * s)

    def mandel(self):
        return np.array([self.sxx, self.syy, SQRT2 * self.sxy])

    def matrix(self):
        return np.array([[self.sxx, self.sxy], [self.sxy, self.syy]])

    def rotated(self, theta):
        """Active rotation ``R sigma R^T`` by ``theta``."""
        return StressTensor.from_mandel(rotation_matrix(theta) @ self.mandel())

    def __add__(self, other):
        return StressTensor(self.sxx + other.sxx, self.syy + other.syy, self.sxy + other.sxy)

    def __sub__(self, other):
        return StressTensor(self.sxx - other.sxx, self.syy - other.syy, self.sxy - other.sxy)

    def __mul__(self, k):
        return StressTensor(k * self.sxx, k * self.syy, k * self.sxy)

    __rmul__ = __mul__

    def __neg__(self):
        return StressTensor(-self.sxx, -self.syy, -self.sxy)

    @property
    def trace(self):
        return self.sxx + self.syy

    @property
    def det(self):
        return self.sxx * self.syy - self.sxy * self.sxy

    @property
    def frob2(self):
        return self.sxx**2 + self.syy**2 + 2.0 * self.sxy**2


def invariants(sigma: StressTensor):
    """Return ``(trace, det, Tr(sigma**2))``."""
    return sigma.trace, sigma.det, sigma.frob2


def eigen(sigma: StressTensor):
    """Sorted eigenvalues ``lam1 <= lam2`` and the angle of the ``lam2`` eigenvector.

    The angle lies in ``(-pi/2, pi/2]``; a repeated eigenvalue gives angle 0.
    """
    mean = 0.5 * (sigma.sxx + sigma.syy)
    half = 0.5 * (sigma.sxx - sigma.syy)
    r = math.hypot(half, sigma.sxy)
    lam1, lam2 = mean - r, mean + r
    if r == 0.0:
        return lam1, lam2, 0.0
    angle = 0.5 * math.atan2(sigma.sxy, half)
    if angle <= -0.5 * math.pi:
        angle += math.pi
    return lam1, lam2, angle


def rank_one_gap(a: StressTensor, b: StressTensor) -> float:
    """``det(a - b)``; zero exactly when the two tensors are rank-one connected or equal."""
    return (a - b).det


def rotation_matrix(theta):
    """Orthogonal 3x3 matrix rotating Mandel vectors by ``theta``."""
    c, s = math.cos(theta), math.sin(theta)
    cs = SQRT2 * c * s
    return np.array([
        [c * c, s * s, -cs],
        [s * s, c * c, cs],
        [cs, -cs, c * c - s * s],
    ])


def rotation_matrices(theta):
    """Stacked rotation matrices for an array of angles, shape ``(..., 3, 3)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    cs = SQRT2 * c * s
    out = np.empty(theta.shape + (3, 3))
    out[..., 0, 0] = c * c
    out[..., 0, 1] = s * s
    out[..., 0, 2] = -cs
    out[..., 1, 0] = s * s
    out[..., 1, 1] = c * c
    out[..., 1, 2] = cs
    out[..., 2, 0] = cs
    out[..., 2, 1] = -cs
    out[..., 2, 2] = c * c - s * s
    return out


def principal_frames(v):
    """Eigen-decomposition of stacked Mandel stress vectors ``v`` of shape ``(n, 3)``.

    Returns ``(lam1, lam2, angle)`` arrays with the same conventions as :func:`eigen`.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    sxy = v[:, 2] / SQRT2
    mean = 0.5 * (v[:, 0] + v[:, 1])
    half = 0.5 * (v[:, 0] - v[:, 1])
    r = np.hypot(half, sxy)
    angle = 0.5 * np.arctan2(sxy, half)
    angle = np.where(angle <= -0.5 * np.pi, angle + np.pi, angle)
    angle = np.where(r == 0.0, 0.0, angle)
    return mean - r, mean + r, angle
