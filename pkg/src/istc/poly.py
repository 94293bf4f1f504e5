"""Polynomials in the unit-delay operator z^-1 and discrete-time transfer functions.

A :class:`DelayPoly` stores ``c_0 + c_1 z^-1 + ... + c_n z^-n`` as the
ascending coefficient array ``[c_0, ..., c_n]``.  Trailing coefficients
below ``EPS_TRIM`` are dropped on construction; the zero polynomial is the
empty array and has degree ``-inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

EPS_TRIM = 1e-12
EPS_STAB = 1e-9


class DelayPoly:
    """Immutable polynomial in z^-1 with ascending coefficients."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable[float] | "DelayPoly" = ()):
        if isinstance(coeffs, DelayPoly):
            c = coeffs._c
        else:
            c = np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                           dtype=float).ravel()
        if not np.all(np.isfinite(c)):
            raise ValueError(f"non-finite polynomial coefficients: {c!r}")
        n = len(c)
        while n > 0 and abs(c[n - 1]) <= EPS_TRIM:
            n -= 1
        c = np.array(c[:n], dtype=float)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def delay(cls, d: int) -> "DelayPoly":
        """The pure delay ``z^-d``."""
        if d < 0:
            raise ValueError("delay must be non-negative")
        return cls([0.0] * d + [1.0])

    @classmethod
    def delta(cls, m: int = 1) -> "DelayPoly":
        """``(1 - z^-1)^m``."""
        p = cls([1.0])
        for _ in range(m):
            p = p * DELTA
        return p

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> float:
        return len(self._c) - 1 if len(self._c) else -math.inf

    def is_zero(self) -> bool:
        return len(self._c) == 0

    def padded(self, length: int) -> np.ndarray:
        """Coefficients zero-padded (never truncated) to ``length`` entries."""
        if length < len(self._c):
            raise ValueError(f"cannot pad degree-{self.degree} polynomial to {length} coefficients")
        out = np.zeros(length)
        out[: len(self._c)] = self._c
        return out

    def __call__(self, zinv: complex) -> complex:
        return poly_eval(self, zinv)

    def __add__(self, other):
        return poly_arith(self, _coerce(other), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return poly_arith(self, _coerce(other), "sub")

    def __rsub__(self, other):
        return poly_arith(_coerce(other), self, "sub")

    def __neg__(self):
        return poly_arith(self, None, "scale", -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return poly_arith(self, None, "scale", float(other))
        return poly_mul(self, _coerce(other))

    __rmul__ = __mul__

    def shift(self, d: int) -> "DelayPoly":
        """Multiply by ``z^-d``."""
        if self.is_zero():
            return self
        return DelayPoly(np.concatenate([np.zeros(d), self._c]))

    def __eq__(self, other):
        if not isinstance(other, DelayPoly):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other: "DelayPoly", atol: float = 1e-12) -> bool:
        n = max(len(self._c), len(other._c))
        return bool(np.max(np.abs(self.padded(n) - other.padded(n)), initial=0.0) <= atol)

    def tolist(self) -> list[float]:
        return [float(x) for x in self._c]

    def __len__(self):
        return len(self._c)

    def __repr__(self):
        return f"DelayPoly({self.tolist()})"


def _coerce(p) -> DelayPoly:
    if isinstance(p, DelayPoly):
        return p
    if isinstance(p, (int, float, np.floating, np.integer)):
        return DelayPoly([float(p)])
    return DelayPoly(p)


ONE = DelayPoly([1.0])
ZERO = DelayPoly([])
DELTA = DelayPoly([1.0, -1.0])


def poly_arith(a: DelayPoly, b: DelayPoly | None, op: str, c: float = 1.0) -> DelayPoly:
    """Coefficientwise ``add``/``sub`` of two polynomials, or ``scale`` of ``a`` by ``c``."""
    if op == "scale":
        return DelayPoly(a.coeffs * c)
    n = max(len(a), len(b))
    if op == "add":
        return DelayPoly(a.padded(n) + b.padded(n))
    if op == "sub":
        return DelayPoly(a.padded(n) - b.padded(n))
    raise ValueError(f"unknown polynomial operation {op!r}")


def poly_mul(a: DelayPoly, b: DelayPoly) -> DelayPoly:
    if a.is_zero() or b.is_zero():
        return ZERO
    return DelayPoly(np.convolve(a.coeffs, b.coeffs))


def poly_eval(p: DelayPoly, zinv: complex) -> complex:
    """Horner evaluation at a value of z^-1 (``zinv=1`` evaluates at z = 1)."""
    acc = 0.0
    for c in p.coeffs[::-1]:
        acc = acc * zinv + c
    return acc


def z_roots(p: DelayPoly) -> np.ndarray:
    """Roots in the z-plane of ``z^n p(z^-1)``, n = deg p.

    Leading zero coefficients (a pure delay factor) make ``z^n p(z^-1)``
    drop degree; each one is reported as a root at infinity so the count
    always equals ``deg p``.
    """
    p = _coerce(p)
    if p.degree < 1:
        raise ValueError("no roots defined for a zero or constant polynomial")
    c = p.coeffs
    lead = int(np.argmax(np.abs(c) > EPS_TRIM))
    finite = np.roots(c[lead:]) if len(c) - lead > 1 else np.array([], dtype=complex)
    return np.concatenate([finite.astype(complex), np.full(lead, complex(np.inf))])


@dataclass(frozen=True)
class StabilityVerdict:
    roots: tuple[complex, ...]
    max_modulus: float
    stable: bool
    margin: float

    def __str__(self):
        flag = "STABLE" if self.stable else "UNSTABLE"
        return f"{flag} (max |z| = {self.max_modulus:.6g}, margin = {self.margin:.6g})"


def is_strictly_stable(p: DelayPoly) -> StabilityVerdict:
    """All z-plane roots strictly inside the unit circle.

    Unit-circle roots count as unstable. Constants are stable with margin 1.
    """
    p = _coerce(p)
    if p.is_zero():
        raise ValueError("stability of the zero polynomial is undefined")
    if p.degree == 0:
        return StabilityVerdict((), 0.0, True, 1.0)
    r = z_roots(p)
    mx = float(np.max(np.abs(r)))
    return StabilityVerdict(tuple(complex(x) for x in r), mx, mx < 1.0 - EPS_STAB, 1.0 - mx)


def factor_delta(p: DelayPoly, tol: float | None = None) -> tuple[int, DelayPoly]:
    """Split ``p = (1 - z^-1)^m * reduced`` with ``|reduced(1)| > tol``.

    The default tolerance scales with the coefficient magnitude.
    """
    p = _coerce(p)
    if p.is_zero():
        return 0, p
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.max(np.abs(p.coeffs))))
    m = 0
    c = p.coeffs
    while len(c) > 1 and abs(c.sum()) <= tol:
        # synthetic division by (1 - z^-1); the dropped remainder is c.sum()
        c = np.cumsum(c)[:-1]
        m += 1
    return m, DelayPoly(c)


@dataclass(frozen=True)
class RationalTf:
    """``num / den`` in z^-1, kept unreduced."""

    num: DelayPoly
    den: DelayPoly

    def __post_init__(self):
        if self.den.is_zero():
            raise ValueError("transfer function denominator is the zero polynomial")

    def dc_gain(self) -> float:
        return float(np.real(self.num(1.0) / self.den(1.0)))

    def filter(self, x: np.ndarray) -> np.ndarray:
        """Response to the input sequence ``x`` from rest."""
        from scipy.signal import lfilter

        num = self.num.coeffs if len(self.num) else np.zeros(1)
        return lfilter(num, self.den.coeffs, np.asarray(x, dtype=float))


def final_value_limit(f: RationalTf, input_pole_order: int, input_num_at_1: float = 1.0) -> float:
    """``lim_{z->1} (1 - z^-1) f(z) R(z)`` for an input with a pole of order ``input_pole_order`` at z = 1.

    ``input_num_at_1`` is the input transform's numerator at z = 1
    (1 for a unit step, ``T_s`` for a ramp of slope ``T_s``, ``n!`` for ``k**n``).
    Returns ``+-inf`` when the limit diverges.
    """
    n = input_pole_order - 1
    if n < 0:
        raise ValueError("input pole order must be at least 1")
    if f.num.is_zero():
        return 0.0
    p_num, red_num = factor_delta(f.num)
    p_den, red_den = factor_delta(f.den)
    p = p_num - p_den
    den1 = float(np.real(red_den(1.0)))
    if p < 0 or abs(den1) <= 1e-12:
        raise ValueError("indeterminate limit: denominator vanishes at z = 1")
    if p > n:
        return 0.0
    value = float(np.real(red_num(1.0))) * input_num_at_1 / den1
    if p == n:
        return value
    return math.copysign(math.inf, value)
