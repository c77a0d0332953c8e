"""Orlicz functions phi, their reciprocals psi = 1/phi and primitives Phi."""

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class OrliczClass(enum.Enum):
    A = "A"
    B = "B"
    NEITHER = "Neither"


class UnsupportedOrliczError(ValueError):
    """The Orlicz function satisfies neither assumption (A) nor (B)."""


def _positive(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("Orlicz functions are defined for s > 0 only")
    return s


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


class OrliczVarphi:
    """Common interface. Subclasses supply ``_varphi``, ``_primitive`` and ``classify``."""

    n: int

    def varphi(self, s):
        return _scalar_or_array(self._varphi(_positive(s)))

    def psi(self, s):
        return _scalar_or_array(1.0 / self._varphi(_positive(s)))

    def dpsi(self, s):
        """Derivative of psi, used by the flow Jacobian."""
        return _scalar_or_array(self._dpsi(_positive(s)))

    def primitive(self, s):
        """Phi(s): integral of psi from 0 (class A) or to +infinity (class B)."""
        if self.classify() is OrliczClass.NEITHER:
            raise UnsupportedOrliczError(f"{self!r} satisfies neither assumption (A) or (B)")
        return _scalar_or_array(self._primitive(_positive(s)))

    def _dpsi(self, s):
        step = 1e-6 * s
        return (1.0 / self._varphi(s + step) - 1.0 / self._varphi(s - step)) / (2.0 * step)


@dataclass(frozen=True)
class PowerLaw(OrliczVarphi):
    """phi(s) = s**(1 - p), the L_p family."""

    p: float
    n: int = 2

    def _varphi(self, s):
        return s ** (1.0 - self.p)

    def psi(self, s):
        return _scalar_or_array(_positive(s) ** (self.p - 1.0))

    def _dpsi(self, s):
        return (self.p - 1.0) * s ** (self.p - 2.0)

    def _primitive(self, s):
        return np.abs(s**self.p / self.p)

    def classify(self):
        if self.p > 0:
            return OrliczClass.A
        if -self.n < self.p < 0:
            return OrliczClass.B
        return OrliczClass.NEITHER


_SANITY_POINTS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class CustomVarphi(OrliczVarphi):
    """User supplied phi with an analytic primitive and a declared class.

    ``classify`` trusts the declared class only after checking that the
    primitive is finite, has the class-appropriate slope (+psi for A, -psi
    for B) and monotonicity at a few sample points. The near-zero growth
    bound required by (B) is declared, not verified.
    """

    varphi_fn: Callable = field(repr=False)
    primitive_fn: Callable = field(repr=False)
    claimed_class: OrliczClass
    n: int = 2
    name: str = "custom"

    def _varphi(self, s):
        return np.asarray(self.varphi_fn(s), dtype=float)

    def _primitive(self, s):
        return np.asarray(self.primitive_fn(s), dtype=float)

    def classify(self):
        if self.claimed_class is OrliczClass.NEITHER:
            return OrliczClass.NEITHER
        sign = 1.0 if self.claimed_class is OrliczClass.A else -1.0
        try:
            for s in _SANITY_POINTS:
                val = float(self.primitive_fn(s))
                phi = float(self.varphi_fn(s))
                if not (math.isfinite(val) and math.isfinite(phi) and phi > 0):
                    return OrliczClass.NEITHER
                ds = 1e-5 * s
                slope = (float(self.primitive_fn(s + ds)) - float(self.primitive_fn(s - ds))) / (2 * ds)
                if abs(slope - sign / phi) > 1e-4 * (1.0 + 1.0 / phi):
                    return OrliczClass.NEITHER
        except (ArithmeticError, ValueError):
            return OrliczClass.NEITHER
        return self.claimed_class


def varphi_eval(spec, s):
    return spec.varphi(s)


def psi_eval(spec, s):
    return spec.psi(s)


def phi_primitive_eval(spec, s):
    return spec.primitive(s)


def classify(spec):
    return spec.classify()


_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("exp", "log", "sqrt", "sin", "cos", "tan", "arctan", "sinh", "cosh", "tanh", "abs", "pi", "e")
}


def _compile_expr(expr):
    code = compile(expr, "<varphi>", "eval")
    for name in code.co_names:
        if name != "s" and name not in _EXPR_NAMESPACE:
            raise ValueError(f"unknown name {name!r} in expression {expr!r}")

    def fn(s):
        return eval(code, {"__builtins__": {}}, {**_EXPR_NAMESPACE, "s": s})

    return fn


def varphi_from_config(cfg, n):
    """Build an Orlicz function from ``{"family": "power", "p": ...}`` or a custom block.

    Custom blocks look like ``{"family": "custom", "varphi": "s**2 + s",
    "primitive": "...", "class": "A"}`` with expressions in the variable ``s``.
    """
    family = cfg.get("family")
    if family == "power":
        return PowerLaw(float(cfg["p"]), n)
    if family == "custom":
        claimed = OrliczClass(cfg.get("class", "Neither"))
        return CustomVarphi(
            _compile_expr(cfg["varphi"]),
            _compile_expr(cfg["primitive"]),
            claimed,
            n,
            name=cfg["varphi"],
        )
    raise ValueError(f"unknown Orlicz family {family!r}")
