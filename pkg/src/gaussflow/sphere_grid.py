"""Discretizations of the unit circle and the unit 2-sphere.

Fields on a grid are plain NumPy arrays: shape ``(N,)`` on :class:`GridS1`
and ``(n_theta, n_phi)`` on :class:`GridS2`. Both grids expose the same
small surface (``integrate``, ``antipodal_symmetrize``, ``check_field``) so
that geometry and flow code can stay dimension agnostic.
"""

from functools import cached_property

import numpy as np
import scipy.sparse as sp

# Central periodic stencils, keyed by (derivative order, accuracy order).
# Entries are the weights for offsets -m..m.
_STENCILS = {
    (1, 4): [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12],
    (1, 6): [-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60],
    (1, 8): [1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280],
    (2, 4): [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12],
    (2, 6): [1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90],
    (2, 8): [-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560],
}

DEFAULT_ACCURACY = 6


class GridError(ValueError):
    """Invalid grid parameters or a field that does not live on the grid."""


def _stencil(deriv, accuracy):
    try:
        w = np.asarray(_STENCILS[(deriv, accuracy)])
    except KeyError:
        raise GridError(f"no stencil for derivative order {deriv} at accuracy {accuracy}") from None
    m = len(w) // 2
    return np.arange(-m, m + 1), w


def periodic_diff(values, spacing, deriv, accuracy=DEFAULT_ACCURACY, axis=-1):
    """Apply a central periodic finite-difference stencil along ``axis``."""
    offsets, w = _stencil(deriv, accuracy)
    m = len(w) // 2
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    # paired differences: constants map to exactly zero
    for k in range(m, 0, -1):
        ahead = np.roll(values, -k, axis=axis)
        behind = np.roll(values, k, axis=axis)
        if deriv == 1:
            out += w[m + k] * (ahead - behind)
        else:
            out += w[m + k] * ((ahead - values) + (behind - values))
    return out / spacing**deriv


def periodic_diff_matrix(n, spacing, deriv, accuracy=DEFAULT_ACCURACY):
    """Sparse circulant matrix of the same stencil as :func:`periodic_diff`."""
    offsets, w = _stencil(deriv, accuracy)
    rows, cols, vals = [], [], []
    idx = np.arange(n)
    for k, wk in zip(offsets, w):
        if wk == 0.0:
            continue
        rows.append(idx)
        cols.append((idx + k) % n)
        vals.append(np.full(n, wk / spacing**deriv))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def barycentric_diff_matrix(x, bary_weights):
    """First-derivative matrix of the polynomial interpolant through nodes ``x``."""
    x = np.asarray(x, dtype=float)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (bary_weights[None, :] / bary_weights[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


class GridS1:
    """Uniform grid on the unit circle with trapezoid quadrature.

    Nodes are ``theta_i = 2*pi*i/N``; the antipode of node ``i`` is node
    ``(i + N/2) mod N``.
    """

    dim = 2

    def __init__(self, N, accuracy=DEFAULT_ACCURACY):
        if int(N) != N or N < 16 or N % 2:
            raise GridError(f"S1 grid needs an even node count >= 16, got {N}")
        _stencil(2, accuracy)
        self.N = int(N)
        self.accuracy = accuracy
        self.spacing = 2.0 * np.pi / self.N
        self.theta = self.spacing * np.arange(self.N)
        self.weights = np.full(self.N, self.spacing)
        self.shape = (self.N,)
        self.size = self.N

    def __repr__(self):
        return f"GridS1(N={self.N}, accuracy={self.accuracy})"

    def __eq__(self, other):
        return isinstance(other, GridS1) and (self.N, self.accuracy) == (other.N, other.accuracy)

    def __hash__(self):
        return hash(("S1", self.N, self.accuracy))

    @property
    def points(self):
        return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=-1)

    def antipodal(self, i):
        return (i + self.N // 2) % self.N

    def check_field(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise GridError(f"field of shape {values.shape} does not match {self!r}")
        return values

    def differentiate(self, values, order):
        """Periodic finite-difference derivative of order 1 or 2."""
        if order not in (1, 2):
            raise GridError(f"derivative order must be 1 or 2, got {order}")
        values = self.check_field(values)
        return periodic_diff(values, self.spacing, order, self.accuracy)

    def integrate(self, values):
        return float(np.dot(self.weights, self.check_field(values)))

    def antipodal_symmetrize(self, values):
        values = self.check_field(values)
        return 0.5 * (values + np.roll(values, -self.N // 2))

    @cached_property
    def d1_matrix(self):
        return periodic_diff_matrix(self.N, self.spacing, 1, self.accuracy)

    @cached_property
    def d2_matrix(self):
        return periodic_diff_matrix(self.N, self.spacing, 2, self.accuracy)


class GridS2:
    """Gauss-Legendre (polar) x uniform (azimuthal) grid on the unit sphere.

    Polar nodes are ``mu_j = cos(theta_j)`` at Gauss-Legendre abscissae in
    ascending order, so no node sits on a pole. Fields are indexed
    ``[j, k]`` with ``k`` the azimuthal index.

    Polar derivatives pair each half meridian with the opposite one
    (azimuth shifted by pi). On the full great circle a smooth function
    splits into ``e(mu) + sin(theta) * q(mu)`` with ``e`` and ``q`` smooth in
    ``mu``, and both parts are differentiated with the barycentric
    differentiation matrix on the Gauss-Legendre nodes.
    """

    dim = 3

    def __init__(self, n_theta, n_phi, accuracy=DEFAULT_ACCURACY):
        if int(n_theta) != n_theta or n_theta < 8:
            raise GridError(f"S2 grid needs n_theta >= 8, got {n_theta}")
        if int(n_phi) != n_phi or n_phi < 16 or n_phi % 2:
            raise GridError(f"S2 grid needs an even n_phi >= 16, got {n_phi}")
        _stencil(2, accuracy)
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.accuracy = accuracy
        self.shape = (self.n_theta, self.n_phi)
        self.size = self.n_theta * self.n_phi

        mu, gl_w = np.polynomial.legendre.leggauss(self.n_theta)
        self.mu = mu
        self.theta = np.arccos(mu)
        self.sin_theta = np.sqrt(1.0 - mu**2)
        self.cos_theta = mu
        self.phi_spacing = 2.0 * np.pi / self.n_phi
        self.phi = self.phi_spacing * np.arange(self.n_phi)
        self.weights = np.outer(gl_w, np.full(self.n_phi, self.phi_spacing))

        # barycentric weights of the Gauss-Legendre nodes
        bw = (-1.0) ** np.arange(self.n_theta) * np.sqrt((1.0 - mu**2) * gl_w)
        D = barycentric_diff_matrix(mu, bw)
        D2 = D @ D
        s, c = self.sin_theta[:, None], self.cos_theta[:, None]
        s_inv = np.diag(1.0 / self.sin_theta)
        even1 = -s * D
        odd1 = np.diag(self.cos_theta) - s**2 * D
        even2 = -c * D + s**2 * D2
        odd2 = -np.diag(self.sin_theta) - 3.0 * s * c * D + s**3 * D2
        # act on the own column (own) and on the opposite half meridian (opp)
        self._dth_own = 0.5 * (even1 + odd1 @ s_inv)
        self._dth_opp = 0.5 * (even1 - odd1 @ s_inv)
        self._dthth_own = 0.5 * (even2 + odd2 @ s_inv)
        self._dthth_opp = 0.5 * (even2 - odd2 @ s_inv)

    def __repr__(self):
        return f"GridS2(n_theta={self.n_theta}, n_phi={self.n_phi}, accuracy={self.accuracy})"

    def __eq__(self, other):
        return isinstance(other, GridS2) and (self.n_theta, self.n_phi, self.accuracy) == (
            other.n_theta,
            other.n_phi,
            other.accuracy,
        )

    def __hash__(self):
        return hash(("S2", self.n_theta, self.n_phi, self.accuracy))

    @property
    def points(self):
        st, ct = self.sin_theta[:, None], self.cos_theta[:, None]
        cp, sn = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        return np.stack(np.broadcast_arrays(st * cp, st * sn, ct * np.ones_like(cp)), axis=-1)

    def antipodal(self, j, k):
        return self.n_theta - 1 - j, (k + self.n_phi // 2) % self.n_phi

    def check_field(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise GridError(f"field of shape {values.shape} does not match {self!r}")
        return values

    def _opposite(self, values):
        return np.roll(values, -self.n_phi // 2, axis=1)

    def d_theta(self, values):
        return self._dth_own @ values + self._dth_opp @ self._opposite(values)

    def d_thetatheta(self, values):
        return self._dthth_own @ values + self._dthth_opp @ self._opposite(values)

    def d_phi(self, values, order=1):
        return periodic_diff(values, self.phi_spacing, order, self.accuracy, axis=1)

    def differentiate(self, values):
        """Return ``(h_t, h_p, h_tt, h_pp, h_tp)`` in lat-long coordinates."""
        values = self.check_field(values)
        h_t = self.d_theta(values)
        return (
            h_t,
            self.d_phi(values, 1),
            self.d_thetatheta(values),
            self.d_phi(values, 2),
            self.d_phi(h_t, 1),
        )

    def integrate(self, values):
        return float(np.sum(self.weights * self.check_field(values)))

    def antipodal_symmetrize(self, values):
        values = self.check_field(values)
        return 0.5 * (values + self._opposite(values[::-1]))

    @cached_property
    def operators(self):
        """Sparse ``(size, size)`` matrices for the five derivatives, row-major node order."""
        shift = sp.csr_matrix(
            (np.ones(self.n_phi), (np.arange(self.n_phi), (np.arange(self.n_phi) + self.n_phi // 2) % self.n_phi)),
            shape=(self.n_phi, self.n_phi),
        )
        eye_p = sp.identity(self.n_phi, format="csr")
        eye_t = sp.identity(self.n_theta, format="csr")
        dth = sp.kron(self._dth_own, eye_p) + sp.kron(self._dth_opp, shift)
        dthth = sp.kron(self._dthth_own, eye_p) + sp.kron(self._dthth_opp, shift)
        dp = sp.kron(eye_t, periodic_diff_matrix(self.n_phi, self.phi_spacing, 1, self.accuracy))
        dpp = sp.kron(eye_t, periodic_diff_matrix(self.n_phi, self.phi_spacing, 2, self.accuracy))
        return {
            "t": dth.tocsr(),
            "p": dp.tocsr(),
            "tt": dthth.tocsr(),
            "pp": dpp.tocsr(),
            "tp": (dp @ dth).tocsr(),
        }

    @cached_property
    def frame_operators(self):
        """Linear maps h -> (b11, b12, b22) of the orthonormal-frame curvature matrix."""
        ops = self.operators
        eye = sp.identity(self.size, format="csr")
        s = np.repeat(self.sin_theta, self.n_phi)[:, None]
        c = np.repeat(self.cos_theta, self.n_phi)[:, None]
        L11 = ops["tt"] + eye
        L12 = ops["tp"].multiply(1.0 / s) - ops["p"].multiply(c / s**2)
        L22 = ops["pp"].multiply(1.0 / s**2) + ops["t"].multiply(c / s) + eye
        return L11.tocsr(), L12.tocsr(), L22.tocsr()


def build_grid_s1(N, accuracy=DEFAULT_ACCURACY):
    return GridS1(N, accuracy)


def build_grid_s2(n_theta, n_phi, accuracy=DEFAULT_ACCURACY):
    return GridS2(n_theta, n_phi, accuracy)


def differentiate_s1(grid, values, order):
    return grid.differentiate(values, order)


def differentiate_s2(grid, values):
    return grid.differentiate(values)


def integrate(grid, values):
    return grid.integrate(values)


def antipodal_symmetrize(grid, values):
    return grid.antipodal_symmetrize(values)
