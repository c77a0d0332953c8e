"""Damped Newton solver for the planar Orlicz-Minkowski equation.

Solves ``c * phi(h) * (h'' + h) = f`` on the circle together with the
volume constraint ``area(h) = V0``. The iteration runs in the space of even
functions (nodes ``0..N/2-1``); the equations at antipodal nodes coincide
there, which also removes the translation kernel ``cos, sin`` of
``h'' + h``.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import geometry
from .sphere_grid import GridS1

logger = logging.getLogger(__name__)


class OracleFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleProblem:
    grid: GridS1
    f: np.ndarray
    spec: object
    V0: float
    init: Optional[np.ndarray] = None
    newton_tol: float = 1e-10
    max_newton_iters: int = 100
    retries: int = 4
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.grid, GridS1):
            raise ValueError("oracle supports n=2 only")
        f = self.grid.check_field(self.f)
        if not np.all(f > 0):
            raise ValueError("f must be positive")
        if np.max(np.abs(f - self.grid.antipodal_symmetrize(f))) > 1e-12 * np.max(f):
            raise ValueError("f must be even")
        if self.V0 <= 0:
            raise ValueError("target volume must be positive")


class OracleSolution(NamedTuple):
    h: np.ndarray
    c: float
    iters: int
    residual: float


class Comparison(NamedTuple):
    sup_rel: float
    l2_rel: float


def round_body(grid, V0):
    """Support function of the disc with area V0."""
    return np.full(grid.shape, np.sqrt(V0 / np.pi))


def _system(problem, h, c):
    grid, spec = problem.grid, problem.spec
    curv = geometry.curvature_matrix(grid, h)
    G = c * spec.varphi(h) * curv.det - problem.f
    vol = grid.integrate(h * curv.det) / grid.dim
    scale = np.min(problem.f)
    half = grid.N // 2
    return np.append(G[:half] / scale, (vol - problem.V0) / problem.V0), curv


def _jacobian(problem, h, c, curv):
    grid, spec = problem.grid, problem.spec
    half = grid.N // 2
    phi = spec.varphi(h)
    dphi = -spec.dpsi(h) / spec.psi(h) ** 2
    ddet = geometry.det_jacobian(grid, h).toarray()
    dG = c * (np.diag(dphi * curv.det) + phi[:, None] * ddet)
    dvol = (grid.weights * curv.det + ddet.T @ (grid.weights * h)) / grid.dim
    scale = np.min(problem.f)
    J = np.zeros((half + 1, half + 1))
    J[:half, :half] = (dG[:half, :half] + dG[:half, half:]) / scale
    J[:half, half] = phi[:half] * curv.det[:half] / scale
    J[half, :half] = (dvol[:half] + dvol[half:]) / problem.V0
    return J


def _converged(problem, F):
    return np.max(np.abs(F[:-1])) <= problem.newton_tol and abs(F[-1]) <= 1e-12


def _newton(problem, h):
    grid = problem.grid
    half = grid.N // 2
    c = problem.f.mean() / np.mean(problem.spec.varphi(h) * geometry.curvature_matrix(grid, h).det)
    F, curv = _system(problem, h, c)
    if _converged(problem, F):
        return OracleSolution(h, float(c), 0, float(np.max(np.abs(F[:-1]))))
    for it in range(1, problem.max_newton_iters + 1):
        J = _jacobian(problem, h, c, curv)
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise OracleFailure(f"singular Newton system at iteration {it}") from exc
        norm = np.linalg.norm(F)
        lam = 1.0
        while True:
            dh = np.tile(delta[:half], 2)
            trial_h = grid.antipodal_symmetrize(h + lam * dh)
            trial_c = c + lam * delta[half]
            if np.all(trial_h > 0) and trial_c > 0:
                trial_F, trial_curv = _system(problem, trial_h, trial_c)
                if np.all(trial_curv.det > 0) and (
                    np.linalg.norm(trial_F) < norm or _converged(problem, trial_F)
                ):
                    break
            lam *= 0.5
            if lam < 2.0**-30:
                raise OracleFailure(f"damping failed at iteration {it} (|F|={norm:.3e})")
        h, c, F, curv = trial_h, trial_c, trial_F, trial_curv
        logger.debug("newton %d: lambda=%g |F|=%.3e", it, lam, np.linalg.norm(F))
        if _converged(problem, F):
            return OracleSolution(h, float(c), it, float(np.max(np.abs(F[:-1]))))
    raise OracleFailure(f"no convergence in {problem.max_newton_iters} Newton iterations")


def solve_newton(problem):
    """Solve the even stationary problem; retry from seeded even perturbations on failure."""
    grid = problem.grid
    base = round_body(grid, problem.V0) if problem.init is None else grid.check_field(problem.init)
    rng = np.random.default_rng(problem.seed)
    attempt, last = base, None
    for k in range(problem.retries + 1):
        try:
            return _newton(problem, attempt)
        except (OracleFailure, geometry.ConvexityLostError) as exc:
            last = exc
            logger.info("oracle attempt %d failed: %s", k, exc)
        modes = np.arange(1, 4)
        amps = 0.05 * rng.standard_normal(len(modes))
        bump = 1.0 + np.cos(2 * np.outer(grid.theta, modes)) @ amps
        attempt = round_body(grid, problem.V0) * bump
    raise OracleFailure(f"oracle failed after {problem.retries + 1} attempts: {last}")


def compare(grid, h1, h2):
    """Relative sup and L2 distance of ``h2`` from the reference ``h1``."""
    h1 = grid.check_field(h1)
    h2 = grid.check_field(h2)
    diff = h2 - h1
    sup_rel = float(np.max(np.abs(diff)) / np.max(np.abs(h1)))
    l2_rel = float(np.sqrt(grid.integrate(diff**2) / grid.integrate(h1**2)))
    return Comparison(sup_rel, l2_rel)
