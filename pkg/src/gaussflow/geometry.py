"""Geometry of convex bodies given by their support function on a sphere grid.

``b = Hess h + h I`` is the matrix of principal radii of curvature in an
orthonormal frame; on S^2 the frame is ``(e_theta, e_phi / sin theta)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from .sphere_grid import GridS1


class ConvexityLostError(ArithmeticError):
    """det b is non-positive at some nodes."""

    def __init__(self, nodes, message=None):
        self.nodes = nodes
        super().__init__(message or f"convexity lost at {len(nodes)} node(s)")


@dataclass(frozen=True)
class CurvatureData:
    b11: np.ndarray
    b12: Optional[np.ndarray]
    b22: Optional[np.ndarray]
    det: np.ndarray
    eig_min: np.ndarray

    @property
    def min_eig(self):
        return float(self.eig_min.min())


@dataclass(frozen=True)
class ConvexityReport:
    ok: bool
    min_eig: float
    violating: np.ndarray


def _frame_derivatives(grid, h):
    h_t, h_p, h_tt, h_pp, h_tp = grid.differentiate(h)
    s = grid.sin_theta[:, None]
    c = grid.cos_theta[:, None]
    return h_t, h_p, h_tt, h_pp, h_tp, s, c


def curvature_matrix(grid, h):
    h = grid.check_field(h)
    if isinstance(grid, GridS1):
        b = grid.differentiate(h, 2) + h
        return CurvatureData(b, None, None, b, b)
    h_t, h_p, h_tt, h_pp, h_tp, s, c = _frame_derivatives(grid, h)
    b11 = h_tt + h
    b12 = h_tp / s - (c / s**2) * h_p
    b22 = h_pp / s**2 + (c / s) * h_t + h
    det = b11 * b22 - b12**2
    half_tr = 0.5 * (b11 + b22)
    eig_min = half_tr - np.sqrt((0.5 * (b11 - b22)) ** 2 + b12**2)
    return CurvatureData(b11, b12, b22, det, eig_min)


def _checked_det(grid, h, curv=None):
    curv = curvature_matrix(grid, h) if curv is None else curv
    bad = np.argwhere(~(curv.det > 0))
    if len(bad):
        raise ConvexityLostError(bad)
    return curv.det


def gauss_curvature(grid, h, curv=None):
    """K = 1 / det b; raises :class:`ConvexityLostError` where det b <= 0."""
    return 1.0 / _checked_det(grid, h, curv)


def grad_norm_sq(grid, h):
    h = grid.check_field(h)
    if isinstance(grid, GridS1):
        return grid.differentiate(h, 1) ** 2
    h_t = grid.d_theta(h)
    h_p = grid.d_phi(h)
    return h_t**2 + (h_p / grid.sin_theta[:, None]) ** 2


def radial_norm(grid, h):
    """|X(x)| = sqrt(h^2 + |grad h|^2): distance of the boundary point with normal x."""
    h = grid.check_field(h)
    return np.sqrt(h**2 + grad_norm_sq(grid, h))


def volume(grid, h, curv=None):
    """Enclosed volume (area for n=2), ``(1/n) * integral of h * det b``."""
    h = grid.check_field(h)
    det = _checked_det(grid, h, curv)
    return grid.integrate(h * det) / grid.dim


def check_convex(grid, h, floor=None):
    h = grid.check_field(h)
    if floor is None:
        floor = 1e-6 * float(np.mean(h))
    curv = curvature_matrix(grid, h)
    violating = np.argwhere(~(curv.eig_min >= floor))
    return ConvexityReport(not len(violating), curv.min_eig, violating)


def det_jacobian(grid, h, curv=None):
    """Sparse derivative of the nodal ``det b`` with respect to nodal ``h``."""
    h = grid.check_field(h)
    if isinstance(grid, GridS1):
        return (grid.d2_matrix + sp.identity(grid.N, format="csr")).tocsr()
    curv = curvature_matrix(grid, h) if curv is None else curv
    L11, L12, L22 = grid.frame_operators

    def rows(op, coef):
        return op.multiply(coef.reshape(-1, 1))

    J = rows(L11, curv.b22) + rows(L22, curv.b11) - rows(L12, 2.0 * curv.b12)
    return J.tocsr()


def boundary_points_s1(grid, h):
    """Boundary points X = grad h + h x on the circle, in normal-angle order."""
    h = grid.check_field(h)
    dh = grid.differentiate(h, 1)
    ct, st = np.cos(grid.theta), np.sin(grid.theta)
    return np.stack([h * ct - dh * st, h * st + dh * ct], axis=-1)


def radial_function_s1(grid, h, directions):
    """rho(u) at polar angles ``directions``, by periodic spline resampling.

    Only meaningful for a uniformly convex body (the direction of X(x) is
    then monotone in the normal angle).
    """
    h = grid.check_field(h)
    dh = grid.differentiate(h, 1)
    alpha = grid.theta + np.arctan2(dh, h)
    rho = np.sqrt(h**2 + dh**2)
    order = np.argsort(alpha)
    alpha, rho = alpha[order], rho[order]
    spline = CubicSpline(
        np.append(alpha, alpha[0] + 2 * np.pi), np.append(rho, rho[0]), bc_type="periodic"
    )
    u = np.asarray(directions, dtype=float)
    return spline(alpha[0] + np.mod(u - alpha[0], 2 * np.pi))


def volume_from_radial_s1(grid, h, n_u=None):
    """Area as (1/2) * integral of rho(u)^2 du on a uniform direction grid."""
    n_u = grid.N if n_u is None else n_u
    u = 2 * np.pi * np.arange(n_u) / n_u
    rho = radial_function_s1(grid, h, u)
    return 0.5 * np.sum(rho**2) * 2 * np.pi / n_u


def rescale_to_volume(grid, h, target):
    """Uniform rescaling s*h with volume ``target`` (volume is n-homogeneous)."""
    return h * (target / volume(grid, h)) ** (1.0 / grid.dim)
