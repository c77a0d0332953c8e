"""Normalized anisotropic Gauss curvature flow on support functions.

The support function evolves by

    dh/dt = -eta(t) * f * K * h * psi(h) + h,     psi = 1 / phi,

with ``eta`` chosen so that the enclosed volume is constant in the
continuum. Stationary points solve ``c * phi(h) * det b = f`` with
``c = 1 / eta``.
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry
from .orlicz import OrliczClass, UnsupportedOrliczError

logger = logging.getLogger(__name__)

TERMINATION_REASONS = (
    "stationary",
    "residual_met",
    "max_steps",
    "time_limit",
    "convexity_lost",
    "h_nonpositive",
)

SCHEMES = ("linearly_implicit", "explicit")

_GROWTH_AFTER = 10
_GROWTH_FACTOR = 1.2


class FlowBreakdown(RuntimeError):
    """The step size fell below ``dt_min`` without producing an acceptable step."""

    def __init__(self, reason, message):
        self.reason = reason
        super().__init__(message)


@dataclass(frozen=True)
class FlowConfig:
    dt0: float = 1e-3
    dt_min: float = 1e-8
    dt_max: float = 1e-2
    max_steps: int = 100_000
    tol_stat: float = 1e-10
    tol_residual: float = 1e-6
    enforce_volume: bool = True
    enforce_symmetry: bool = True
    convexity_floor: Optional[float] = None
    diagnostics_every: int = 10
    scheme: str = "linearly_implicit"
    # largest accepted sup|h+ - h| / sup h per step
    max_rel_change: float = 0.05
    t_max: float = math.inf

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt0 <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt0 <= dt_max")
        if self.tol_stat <= 0 or self.tol_residual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 0 or self.diagnostics_every < 1:
            raise ValueError("max_steps must be >= 0 and diagnostics_every >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.convexity_floor is not None and self.convexity_floor <= 0:
            raise ValueError("convexity_floor must be positive")
        if self.max_rel_change <= 0:
            raise ValueError("max_rel_change must be positive")


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    J: float
    volume: float
    min_h: float
    max_h: float
    max_K: float
    min_eig_b: float
    eta: float
    sup_rate: float
    residual: float
    dt: float


DIAGNOSTIC_COLUMNS = tuple(f.name for f in fields(DiagnosticsRow))


@dataclass(frozen=True)
class FlowState:
    grid: object
    h: np.ndarray
    t: float
    dt: float
    V0: float
    floor: float
    step_count: int = 0
    accepts_in_row: int = 0
    last_correction: float = 0.0


@dataclass
class FlowResult:
    h: np.ndarray
    c_star: float
    reason: str
    diagnostics: list
    steps: int
    t: float
    V0: float
    residual: float
    volume_corrections: list = field(default_factory=list)


class Residual(NamedTuple):
    field: np.ndarray
    sup_rel: float


def eta(grid, h, f, spec, curv=None):
    """Volume-preserving normalization: int h det b / int f h psi(h)."""
    det = geometry.gauss_curvature(grid, h, curv) ** -1
    return grid.integrate(h * det) / grid.integrate(f * h * spec.psi(h))


def velocity(grid, h, f, spec, curv=None, eta_value=None):
    curv = geometry.curvature_matrix(grid, h) if curv is None else curv
    K = geometry.gauss_curvature(grid, h, curv)
    if eta_value is None:
        eta_value = eta(grid, h, f, spec, curv)
    return h - eta_value * f * K * h * spec.psi(h)


def velocity_jacobian(grid, h, f, spec, curv, eta_value):
    """Sparse d(velocity)/dh with eta held fixed."""
    K = 1.0 / curv.det
    psi = spec.psi(h)
    dg = psi + h * spec.dpsi(h)
    local = (1.0 - eta_value * f * dg * K).ravel()
    nonlocal_ = (eta_value * f * h * psi * K**2).ravel()
    ddet = geometry.det_jacobian(grid, h, curv)
    return (sp.diags(local) + ddet.multiply(nonlocal_.reshape(-1, 1))).tocsc()


def functional_J(grid, h, f, spec):
    return grid.integrate(spec.primitive(h) * f)


def fit_constant_c(grid, h, f, spec, curv=None):
    """c* making the mean residual of c * phi(h) * det b - f vanish."""
    det = geometry.gauss_curvature(grid, h, curv) ** -1
    return grid.integrate(f) / grid.integrate(spec.varphi(h) * det)


def residual(grid, h, f, spec, curv=None):
    curv = geometry.curvature_matrix(grid, h) if curv is None else curv
    c = fit_constant_c(grid, h, f, spec, curv)
    r = c * spec.varphi(h) * curv.det - f
    return Residual(r, float(np.max(np.abs(r)) / np.min(f)))


def radial_rate(grid, h, f, spec):
    """rho and d rho/dt at the boundary points X(x), from rho_t / rho = h_t / h."""
    rho = geometry.radial_norm(grid, h)
    return rho, rho * velocity(grid, h, f, spec) / h


def _increment(grid, h, f, spec, dt, scheme, curv):
    eta_value = eta(grid, h, f, spec, curv)
    v = velocity(grid, h, f, spec, curv, eta_value)
    if scheme == "explicit":
        return dt * v
    J = velocity_jacobian(grid, h, f, spec, curv, eta_value)
    A = sp.identity(grid.size, format="csc") - dt * J
    return spla.spsolve(A, dt * v.ravel()).reshape(grid.shape)


def step(state, f, spec, config):
    """Advance one accepted step, halving ``dt`` on rejection.

    Raises :class:`FlowBreakdown` once ``dt`` drops below ``config.dt_min``.
    """
    grid, h = state.grid, state.h
    curv = geometry.curvature_matrix(grid, h)
    dt = state.dt
    if config.t_max < math.inf:
        dt = min(dt, config.t_max - state.t)
    while True:
        reason = None
        with np.errstate(all="ignore"):
            try:
                delta = _increment(grid, h, f, spec, dt, config.scheme, curv)
            except (geometry.ConvexityLostError, RuntimeError):
                delta = np.full(grid.shape, np.nan)
        new = h + delta
        if config.enforce_symmetry:
            new = grid.antipodal_symmetrize(new)
        if not np.all(new > 0):
            reason = "h_nonpositive"
        else:
            new_curv = geometry.curvature_matrix(grid, new)
            if not np.all(new_curv.det > 0):
                reason = "convexity_lost"
        if reason is None:
            scale = 1.0
            if config.enforce_volume:
                vol = geometry.volume(grid, new, new_curv)
                scale = (state.V0 / vol) ** (1.0 / grid.dim)
                new = scale * new
            if scale * new_curv.min_eig < state.floor:
                reason = "convexity_lost"
            elif np.max(np.abs(new - h)) > config.max_rel_change * np.max(h):
                reason = "step_too_large"
        if reason is None:
            break
        logger.debug("step %d rejected at dt=%.3e (%s)", state.step_count, dt, reason)
        dt *= 0.5
        if dt < config.dt_min:
            final = "convexity_lost" if reason == "step_too_large" else reason
            raise FlowBreakdown(final, f"dt fell below dt_min={config.dt_min:g} ({reason})")
        state = replace(state, accepts_in_row=0)

    accepts = state.accepts_in_row + 1
    next_dt = dt if state.dt > dt else state.dt
    if accepts >= _GROWTH_AFTER:
        next_dt = min(_GROWTH_FACTOR * next_dt, config.dt_max)
        accepts = 0
    correction = abs(scale - 1.0)
    logger.debug("t=%.6f dt=%.3e volume correction %.3e", state.t + dt, dt, correction)
    return replace(
        state,
        h=new,
        t=state.t + dt,
        dt=next_dt,
        step_count=state.step_count + 1,
        accepts_in_row=accepts,
        last_correction=correction,
    )


def _is_even(grid, values, tol=1e-10):
    return np.max(np.abs(values - grid.antipodal_symmetrize(values))) <= tol * np.max(np.abs(values))


def _diagnostics(grid, h, f, spec, curv, t, dt):
    K = geometry.gauss_curvature(grid, h, curv)
    eta_value = eta(grid, h, f, spec, curv)
    v = velocity(grid, h, f, spec, curv, eta_value)
    row = DiagnosticsRow(
        t=t,
        J=functional_J(grid, h, f, spec),
        volume=geometry.volume(grid, h, curv),
        min_h=float(h.min()),
        max_h=float(h.max()),
        max_K=float(K.max()),
        min_eig_b=curv.min_eig,
        eta=eta_value,
        sup_rate=float(np.max(np.abs(v)) / np.max(h)),
        residual=residual(grid, h, f, spec, curv).sup_rel,
        dt=dt,
    )
    return row


def initial_state(grid, h0, f, spec, config):
    """Validate the inputs of a flow run and build its starting state."""
    if spec.classify() is OrliczClass.NEITHER:
        raise UnsupportedOrliczError(
            f"{spec!r} satisfies neither assumption (A) or (B); the flow needs one of them"
        )
    h0 = grid.check_field(h0)
    f = grid.check_field(f)
    if not np.all(h0 > 0):
        raise ValueError("initial support function must be positive")
    if not np.all(f > 0):
        raise ValueError("f must be positive")
    if not _is_even(grid, h0) or not _is_even(grid, f):
        raise ValueError("initial body and f must be origin-symmetric (even)")
    floor = config.convexity_floor
    if floor is None:
        floor = 1e-6 * float(np.mean(h0))
    report = geometry.check_convex(grid, h0, floor)
    if not report.ok:
        raise ValueError(f"initial body is not uniformly convex (min eigenvalue {report.min_eig:.3g})")
    if config.enforce_symmetry:
        h0 = grid.antipodal_symmetrize(h0)
    return FlowState(grid, h0, 0.0, config.dt0, geometry.volume(grid, h0), floor)


def run(grid, h0, f, spec, config=None, callback=None):
    """Evolve ``h0`` until stationary, residual-certified, or out of budget.

    ``callback(state)`` is invoked after every accepted step.
    """
    config = FlowConfig() if config is None else config
    state = initial_state(grid, h0, f, spec, config)
    f = grid.check_field(f)
    rows = []
    corrections = []
    while True:
        curv = geometry.curvature_matrix(grid, state.h)
        row = _diagnostics(grid, state.h, f, spec, curv, state.t, state.dt)
        reason = None
        if row.sup_rate <= config.tol_stat:
            reason = "stationary"
        elif row.residual <= config.tol_residual:
            reason = "residual_met"
        elif state.step_count >= config.max_steps:
            reason = "max_steps"
        elif state.t >= config.t_max - 1e-9 * state.dt:
            reason = "time_limit"
        if reason is not None or state.step_count % config.diagnostics_every == 0:
            rows.append(row)
        if reason is not None:
            break
        try:
            state = step(state, f, spec, config)
        except FlowBreakdown as exc:
            logger.warning("flow stopped at t=%.6f: %s", state.t, exc)
            reason = exc.reason
            if rows[-1] is not row:
                rows.append(row)
            break
        corrections.append(state.last_correction)
        if callback is not None:
            callback(state)

    logger.info("flow finished: %s after %d steps (t=%.4f)", reason, state.step_count, state.t)
    final_curv = geometry.curvature_matrix(grid, state.h)
    return FlowResult(
        h=state.h,
        c_star=fit_constant_c(grid, state.h, f, spec, final_curv),
        reason=reason,
        diagnostics=rows,
        steps=state.step_count,
        t=state.t,
        V0=state.V0,
        residual=residual(grid, state.h, f, spec, final_curv).sup_rel,
        volume_corrections=corrections,
    )
