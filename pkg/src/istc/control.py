"""Runtime evaluation of the incremental control law ``H du = E err - G dy``."""

from __future__ import annotations

from collections import deque

import numpy as np

from .synth import EPS_H, ControllerPolys, SingularGainError


class ControllerState:
    """Histories consumed by :func:`control_step`.

    Buffer lengths are fixed at construction; any controller whose
    polynomial degrees fit (``deg H <= n_h``, ``deg E <= n_e``,
    ``deg G <= n_g``) can be bound without losing history.
    """

    def __init__(self, n_h: int, n_e: int, n_g: int):
        self.n_h, self.n_e, self.n_g = n_h, n_e, n_g
        self.reset()

    @classmethod
    def for_polys(cls, c: ControllerPolys, spare: int = 0) -> "ControllerState":
        return cls(max(len(c.H) - 1, 0) + spare, max(len(c.E) - 1, 0) + spare,
                   max(len(c.G) - 1, 0) + spare)

    def reset(self) -> None:
        # du(k-1).., err(k-1).., dy(k-1)..; newest first
        self.du = deque([0.0] * self.n_h, maxlen=self.n_h)
        self.err = deque([0.0] * self.n_e, maxlen=self.n_e)
        self.dy = deque([0.0] * self.n_g, maxlen=self.n_g)
        self.u_prev = 0.0
        self.y_prev = 0.0

    def fits(self, c: ControllerPolys) -> bool:
        return len(c.H) - 1 <= self.n_h and len(c.E) - 1 <= self.n_e and len(c.G) - 1 <= self.n_g

    def advance(self, err: float, dy: float, du: float, y: float) -> float:
        """Record time k (after du(k) is known) and return u(k)."""
        if self.n_h:
            self.du.appendleft(du)
        if self.n_e:
            self.err.appendleft(err)
        if self.n_g:
            self.dy.appendleft(dy)
        self.u_prev += du
        self.y_prev = y
        return self.u_prev


def _dot(p, current: float, past: deque) -> float:
    c = p.coeffs
    if len(c) == 0:
        return 0.0
    acc = c[0] * current
    if len(c) > 1:
        acc += float(np.dot(c[1:], np.fromiter(past, float, count=len(past))[: len(c) - 1]))
    return acc


def control_step(c: ControllerPolys, state: ControllerState, y_ref_future: float, y_now: float) -> float:
    """Compute u(k) from ``y*(k+d)`` and ``y(k)``; advances ``state``."""
    h = c.H.coeffs
    if abs(h[0]) <= EPS_H:
        raise SingularGainError("singular control gain")
    if not state.fits(c):
        raise ValueError("controller polynomials exceed the history buffers of this state")
    err = y_ref_future - y_now
    dy = y_now - state.y_prev
    num = _dot(c.E, err, state.err) - _dot(c.G, dy, state.dy)
    if len(h) > 1:
        num -= float(np.dot(h[1:], np.fromiter(state.du, float, count=len(state.du))[: len(h) - 1]))
    du = num / h[0]
    return state.advance(err, dy, du, y_now)


def control_hold(state: ControllerState, y_ref_future: float, y_now: float) -> float:
    """Keep u(k) = u(k-1) while still recording the signal histories."""
    return state.advance(y_ref_future - y_now, y_now - state.y_prev, 0.0, y_now)


def controller_reset(state: ControllerState) -> None:
    state.reset()
