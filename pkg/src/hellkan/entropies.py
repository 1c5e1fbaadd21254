"""Admissible entropy functions on the half line.

An :class:`EntropyFunction` is one of a small set of closed families: the
power-like entropies ``U_p``, the total variation entropy ``|s - 1|``, the
indicator of ``{1}`` and the indicator of an interval ``[a, b]``.  Every
family has closed forms for the entropy, its Legendre conjugate, the reverse
entropy and the boundary constants.

Extended reals are plain floats: ``np.inf`` and ``-np.inf`` are used
directly, and ``0 * inf`` is taken to be ``0`` wherever a product with a mass
appears (see :func:`mul0`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import xlogy

ArrayLike = Union[float, np.ndarray]

POWER = "power"
TV = "tv"
INDICATOR = "indicator"
INTERVAL = "interval"

_FAMILIES = (POWER, TV, INDICATOR, INTERVAL)


class DomainError(ValueError):
    """Argument outside the domain of an entropy operation."""


def mul0(a, b):
    """Product with the convention ``0 * (+-inf) = 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    out = np.where((a == 0) | (b == 0), 0.0, out)
    return out if out.ndim else float(out)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class EntropyFunction:
    """Convex, lower semicontinuous entropy ``F: [0, inf) -> [0, inf]``.

    Parameters
    ----------
    family : {"power", "tv", "indicator", "interval"}
    p : float
        Exponent of the power-like family (ignored otherwise).
    a, b : float
        Interval bounds for the ``"interval"`` family, ``0 <= a <= 1 <= b``;
        ``b`` may be ``inf``.
    """

    family: str
    p: float = 1.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown entropy family {self.family!r}")
        if self.family == INTERVAL:
            if not (0.0 <= self.a <= 1.0 <= self.b):
                raise ValueError("interval entropy needs 0 <= a <= 1 <= b")

    # ------------------------------------------------------------------
    # constructors and serialization

    @classmethod
    def power(cls, p: float) -> "EntropyFunction":
        return cls(POWER, p=float(p))

    @classmethod
    def log(cls) -> "EntropyFunction":
        """``U_1(s) = s log s - s + 1``."""
        return cls(POWER, p=1.0)

    @classmethod
    def tv(cls) -> "EntropyFunction":
        return cls(TV)

    @classmethod
    def indicator(cls) -> "EntropyFunction":
        return cls(INDICATOR)

    @classmethod
    def interval(cls, a: float, b: float) -> "EntropyFunction":
        return cls(INTERVAL, a=float(a), b=float(b))

    def to_dict(self) -> dict:
        if self.family == POWER:
            return {"family": POWER, "p": self.p}
        if self.family == INTERVAL:
            b = "inf" if np.isinf(self.b) else self.b
            return {"family": INTERVAL, "a": self.a, "b": b}
        return {"family": self.family}

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyFunction":
        fam = d.get("family")
        if fam == POWER:
            return cls.power(float(d["p"]))
        if fam == TV:
            return cls.tv()
        if fam == INDICATOR:
            return cls.indicator()
        if fam == INTERVAL:
            return cls.interval(float(d["a"]), float(d["b"]))
        raise ValueError(f"unknown entropy family {fam!r}")

    def __repr__(self):
        if self.family == POWER:
            return f"EntropyFunction.power({self.p:g})"
        if self.family == INTERVAL:
            return f"EntropyFunction.interval({self.a:g}, {self.b:g})"
        return f"EntropyFunction.{self.family}()"

    @property
    def is_log(self) -> bool:
        return self.family == POWER and self.p == 1.0

    @property
    def smooth(self) -> bool:
        """True when ``F`` is differentiable on the interior of its domain."""
        return self.family == POWER

    # ------------------------------------------------------------------
    # boundary constants

    @property
    def f_at_zero(self) -> float:
        """``F(0)``."""
        if self.family == POWER:
            return 1.0 / self.p if self.p > 0 else np.inf
        if self.family == TV:
            return 1.0
        if self.family == INDICATOR:
            return np.inf
        return 0.0 if self.a == 0 else np.inf

    @property
    def recession(self) -> float:
        """Recession slope ``lim F(s)/s`` as ``s -> inf``."""
        if self.family == POWER:
            return np.inf if self.p >= 1 else 1.0 / (1.0 - self.p)
        if self.family == TV:
            return 1.0
        if self.family == INDICATOR:
            return np.inf
        return 0.0 if np.isinf(self.b) else np.inf

    @property
    def right_derivative_at_zero(self) -> float:
        """``F'(0)``; ``-inf`` whenever ``F(0) = inf``."""
        if self.family == POWER:
            return -1.0 / (self.p - 1.0) if self.p > 1 else -np.inf
        if self.family == TV:
            return -1.0
        if self.family == INDICATOR:
            return -np.inf
        return 0.0 if self.a == 0 else -np.inf

    @property
    def affine_asymptote(self) -> float:
        """``lim (F_inf s - F(s))``, or ``inf`` when the recession is infinite."""
        if self.family == POWER:
            return -1.0 / self.p if self.p < 0 else np.inf
        if self.family == TV:
            return 1.0
        if self.family == INDICATOR:
            return np.inf
        return 0.0 if np.isinf(self.b) else np.inf

    def domain(self) -> tuple[float, float, bool, bool]:
        """``(lo, hi, lo_closed, hi_closed)`` describing ``dom F``."""
        if self.family == POWER:
            return (0.0, np.inf, self.p > 0, False)
        if self.family == TV:
            return (0.0, np.inf, True, False)
        if self.family == INDICATOR:
            return (1.0, 1.0, True, True)
        return (self.a, self.b, True, not np.isinf(self.b))

    # ------------------------------------------------------------------
    # evaluation

    def __call__(self, s: ArrayLike) -> ArrayLike:
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(np.isnan(s)):
            raise DomainError("entropy argument must be nonnegative")
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam == POWER:
                p = self.p
                if p == 1.0:
                    out = xlogy(s, s) - s + 1.0
                elif p == 0.0:
                    out = np.where(s > 0, s - 1.0 - np.log(s), np.inf)
                else:
                    out = (s**p - p * (s - 1.0) - 1.0) / (p * (p - 1.0))
                    out = np.where(s > 0, out, self.f_at_zero)
                out = np.where(np.isinf(s), np.inf, out)
            elif fam == TV:
                out = np.abs(s - 1.0)
            elif fam == INDICATOR:
                out = np.where(s == 1.0, 0.0, np.inf)
            else:
                out = np.where((s >= self.a) & (s <= self.b), 0.0, np.inf)
        return _scalar(out)

    def derivative(self, s: ArrayLike) -> ArrayLike:
        """``F'(s)`` for ``s > 0`` (a subgradient at kinks)."""
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == POWER:
                p = self.p
                if p == 1.0:
                    out = np.log(s)
                elif p == 0.0:
                    out = 1.0 - 1.0 / s
                else:
                    out = np.expm1((p - 1.0) * np.log(s)) / (p - 1.0)
            elif self.family == TV:
                out = np.sign(s - 1.0)
            else:
                out = np.zeros_like(s)
        return _scalar(out)

    def conjugate(self, phi: ArrayLike) -> ArrayLike:
        """Legendre conjugate ``F*(phi) = sup_{s >= 0} (s phi - F(s))``.

        At ``phi = F_inf`` with a finite affine asymptote the value is
        ``aff F_inf``.
        """
        phi = np.asarray(phi, dtype=float)
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam == POWER:
                p = self.p
                if p == 1.0:
                    out = np.expm1(phi)
                elif p == 0.0:
                    out = np.where(phi < 1.0, -np.log1p(-phi), np.inf)
                else:
                    q = p / (p - 1.0)
                    base = (p - 1.0) * phi  # 1 + base is the conjugate's base
                    if p > 1:
                        out = np.where(
                            base > -1.0, np.expm1(q * np.log1p(base)) / p, -1.0 / p
                        )
                    else:
                        out = np.where(
                            base > -1.0, np.expm1(q * np.log1p(base)) / p, np.inf
                        )
                        if p < 0:
                            out = np.where(base == -1.0, -1.0 / p, out)
                out = np.where(phi == -np.inf, -self.f_at_zero, out)
            elif fam == TV:
                out = np.where(phi <= 1.0, np.maximum(phi, -1.0), np.inf)
            elif fam == INDICATOR:
                out = phi.copy()
            else:
                lo = mul0(self.a, phi)
                hi = np.where(phi > 0, self.b * phi, mul0(self.b, phi))
                out = np.maximum(lo, hi)
        return _scalar(out)

    def conj_circ(self, phi: ArrayLike) -> ArrayLike:
        """Concave companion ``F°(phi) = -F*(-phi)``."""
        return _scalar(-np.asarray(self.conjugate(-np.asarray(phi, dtype=float))))

    def marginal_density(self, phi: ArrayLike) -> ArrayLike:
        """Derivative of ``F°`` at ``phi``: the optimal density ``s`` for ``-phi``.

        Defined on the smooth part of ``F°``; at kinks the right derivative is
        returned.
        """
        phi = np.asarray(phi, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.family == POWER:
                p = self.p
                if p == 1.0:
                    out = np.exp(-phi)
                else:
                    base = 1.0 - (p - 1.0) * phi
                    out = np.where(
                        base > 0, np.exp(np.log(np.maximum(base, 0.0)) / (p - 1.0)),
                        0.0 if p > 1 else np.inf,
                    )
            elif self.family == TV:
                out = np.where(phi < 1.0, 1.0, 0.0)
            elif self.family == INDICATOR:
                out = np.ones_like(phi)
            else:
                out = np.where(phi < 0, self.b, self.a)
        return _scalar(out)

    # ------------------------------------------------------------------
    # reverse entropy

    def reverse(self) -> "EntropyFunction":
        """Reverse entropy ``R(r) = r F(1/r)``, ``R(0) = F_inf``."""
        if self.family == POWER:
            return EntropyFunction.power(1.0 - self.p)
        if self.family == INTERVAL:
            a = 1.0 / self.b if not np.isinf(self.b) else 0.0
            b = 1.0 / self.a if self.a > 0 else np.inf
            return EntropyFunction.interval(a, b)
        return self

    def rstar(self, psi: ArrayLike) -> ArrayLike:
        """Conjugate of the reverse entropy, ``R*(psi)``."""
        return self.reverse().conjugate(psi)

    def rstar_inverse(self, u: ArrayLike) -> ArrayLike:
        """Largest ``psi <= F(0)`` with ``R*(psi) <= u``.

        This equals ``F°(u) = -F*(-u)``; ``u = inf`` gives ``F(0)``.

        Raises
        ------
        DomainError
            If ``u`` lies below ``inf R* = -F_inf``.
        """
        out = np.asarray(self.conj_circ(u), dtype=float)
        if np.any(out == -np.inf) or np.any(np.isnan(out)):
            raise DomainError("u below the range of R*")
        return _scalar(out)


def eval_entropy(e: EntropyFunction, s: ArrayLike) -> ArrayLike:
    return e(s)


def eval_conjugate(e: EntropyFunction, phi: ArrayLike) -> ArrayLike:
    return e.conjugate(phi)


def reverse_entropy(e: EntropyFunction) -> EntropyFunction:
    return e.reverse()


def rstar_inverse(e: EntropyFunction, u: ArrayLike) -> ArrayLike:
    return e.rstar_inverse(u)
