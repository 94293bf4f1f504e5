"""Plant models: ARMAX/DARMA, the incremental (EDLM) form, and their simulators.

The EDLM reads

    dy(k+1) = phi_y(z^-1) dy(k) + phi_u(z^-1) du(k-d+1) + phi_w(z^-1) dw(k) + dw(k+1)

with the regressor ``dH(k) = [dy(k)..dy(k-Ly+1), du(k-d+1)..du(k-d-Lu+2), dw(k)..dw(k-Lw+1)]``.
"""

from __future__ import annotations

import importlib
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .poly import DelayPoly, is_strictly_stable


@dataclass(frozen=True)
class ModelOrders:
    L_y: int
    L_u: int
    L_w: int = 0
    d: int = 1

    def __post_init__(self):
        if self.L_y < 1 or self.L_u < 1 or self.L_w < 0 or self.d < 1:
            raise ValueError(
                f"invalid orders L_y={self.L_y}, L_u={self.L_u}, L_w={self.L_w}, d={self.d}: "
                "need L_y >= 1, L_u >= 1, L_w >= 0, d >= 1")

    @property
    def n_params(self) -> int:
        return self.L_y + self.L_u + self.L_w


@dataclass(frozen=True)
class PgModel:
    """Pseudo-gradient (PG) coefficients of the EDLM.

    The three sub-polynomials are stored zero-padded to exactly
    ``L_y``, ``L_u`` and ``L_w`` coefficients.
    """

    orders: ModelOrders
    phi_y: np.ndarray
    phi_u: np.ndarray
    phi_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bound_b: float | None = None

    def __post_init__(self):
        o = self.orders
        for name, n in (("phi_y", o.L_y), ("phi_u", o.L_u), ("phi_w", o.L_w)):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if len(v) != n:
                raise ValueError(f"{name} has {len(v)} coefficients, orders require {n}")
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.bound_b is not None and np.linalg.norm(self.theta) > self.bound_b:
            raise ValueError(f"PG norm {np.linalg.norm(self.theta):.6g} exceeds bound {self.bound_b}")

    @classmethod
    def from_theta(cls, orders: ModelOrders, theta: Sequence[float]) -> "PgModel":
        theta = np.asarray(theta, dtype=float)
        if len(theta) != orders.n_params:
            raise ValueError(f"PG vector has {len(theta)} entries, orders require {orders.n_params}")
        a, b = orders.L_y, orders.L_y + orders.L_u
        return cls(orders, theta[:a], theta[a:b], theta[b:])

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.phi_y, self.phi_u, self.phi_w])

    @property
    def poly_y(self) -> DelayPoly:
        return DelayPoly(self.phi_y)

    @property
    def poly_u(self) -> DelayPoly:
        return DelayPoly(self.phi_u)

    @property
    def poly_w(self) -> DelayPoly:
        return DelayPoly(self.phi_w)

    @property
    def lead_gain(self) -> float:
        """The leading input gain ``phi_{Ly+1}``."""
        return float(self.phi_u[0])

    def output_poly(self) -> DelayPoly:
        """``1 - z^-1 phi_y(z^-1)``."""
        return 1.0 - self.poly_y.shift(1)

    def noise_poly(self) -> DelayPoly:
        """``1 + z^-1 phi_w(z^-1)``."""
        return 1.0 + self.poly_w.shift(1)

    def deterministic(self) -> "PgModel":
        """The same model with the disturbance part dropped (L_w = 0)."""
        o = self.orders
        return PgModel(ModelOrders(o.L_y, o.L_u, 0, o.d), self.phi_y, self.phi_u)

    def check_noise_stable(self) -> bool:
        return self.orders.L_w == 0 or is_strictly_stable(self.noise_poly()).stable


@dataclass(frozen=True)
class ArmaxModel:
    """``A y(k+1) = z^{-d+1} B u(k) + C zeta(k+1)``; ``C`` empty means DARMA."""

    A: DelayPoly
    B: DelayPoly
    C: DelayPoly = field(default_factory=DelayPoly)
    d: int = 1
    noise_variance: float = 0.0

    def __post_init__(self):
        for name in ("A", "B", "C"):
            v = getattr(self, name)
            if not isinstance(v, DelayPoly):
                object.__setattr__(self, name, DelayPoly(v))
        if len(self.A) == 0 or abs(self.A.coeffs[0] - 1.0) > 1e-12:
            raise ValueError("A must be monic (a_0 = 1)")
        if len(self.C) and abs(self.C.coeffs[0] - 1.0) > 1e-12:
            raise ValueError("C must be monic (c_0 = 1) or empty")
        if self.d < 1:
            raise ValueError("delay d must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def is_darma(self) -> bool:
        return len(self.C) == 0


def min_orders(m: ArmaxModel) -> ModelOrders:
    """Smallest EDLM orders that represent ``m`` exactly."""
    return ModelOrders(
        L_y=max(1, len(m.A) - 1),
        L_u=max(1, len(m.B)),
        L_w=max(0, len(m.C) - 1),
        d=m.d,
    )


def armax_to_edlm(m: ArmaxModel, orders: ModelOrders) -> PgModel:
    """Convert by differencing; the disturbance is identified as ``w = zeta``."""
    need = min_orders(m)
    problems = []
    if orders.L_y < need.L_y:
        problems.append(f"L_y >= {need.L_y}")
    if orders.L_u < need.L_u:
        problems.append(f"L_u >= {need.L_u}")
    if orders.L_w < need.L_w:
        problems.append(f"L_w >= {need.L_w}")
    if orders.d != m.d:
        problems.append(f"d == {m.d}")
    if problems:
        raise ValueError("orders too small for this model; require " + ", ".join(problems))
    phi_y = np.zeros(orders.L_y)
    phi_y[: len(m.A) - 1] = -m.A.coeffs[1:]
    phi_u = np.zeros(orders.L_u)
    phi_u[: len(m.B)] = m.B.coeffs
    phi_w = np.zeros(orders.L_w)
    phi_w[: max(0, len(m.C) - 1)] = m.C.coeffs[1:]
    return PgModel(orders, phi_y, phi_u, phi_w)


def darma_to_edlm(m: ArmaxModel, orders: ModelOrders) -> PgModel:
    if not m.is_darma:
        raise ValueError("darma_to_edlm needs a model without a noise polynomial")
    if orders.L_w != 0:
        orders = ModelOrders(orders.L_y, orders.L_u, 0, orders.d)
    return armax_to_edlm(m, orders)


def edlm_to_armax(pg: PgModel, noise_variance: float = 0.0) -> ArmaxModel:
    """Inverse of :func:`armax_to_edlm` (zero padding is trimmed)."""
    A = DelayPoly(np.concatenate([[1.0], -pg.phi_y]))
    C = DelayPoly(np.concatenate([[1.0], pg.phi_w])) if pg.orders.L_w else DelayPoly()
    return ArmaxModel(A, DelayPoly(pg.phi_u), C, pg.orders.d, noise_variance)


class RegressorWindow:
    """Sliding histories that assemble ``dH(k)``.

    ``push(dy, du, dw)`` records the increments of time k; afterwards
    :meth:`vector` returns ``dH(k)``, whose input slots start at ``du(k-d+1)``.
    """

    def __init__(self, orders: ModelOrders):
        self.orders = orders
        self._dy = deque([0.0] * orders.L_y, maxlen=orders.L_y)
        self._du = deque([0.0] * (orders.L_u + orders.d - 1), maxlen=orders.L_u + orders.d - 1)
        self._dw = deque([0.0] * orders.L_w, maxlen=orders.L_w) if orders.L_w else deque(maxlen=0)

    def push(self, dy: float, du: float, dw: float = 0.0) -> None:
        self._dy.appendleft(float(dy))
        self._du.appendleft(float(du))
        if self.orders.L_w:
            self._dw.appendleft(float(dw))

    def vector(self) -> np.ndarray:
        d = self.orders.d
        du = list(self._du)[d - 1:]
        return np.array(list(self._dy) + du + list(self._dw))

    def reset(self) -> None:
        self.__init__(self.orders)


def regressor_push(window: RegressorWindow, dy: float, du: float, dw: float = 0.0) -> None:
    window.push(dy, du, dw)


def edlm_step(pg: PgModel, window: RegressorWindow, dw_next: float) -> float:
    """``dy(k+1) = phi^T dH(k) + dw(k+1)``; ``window`` must already hold time k."""
    return float(pg.theta @ window.vector()) + dw_next


class ArmaxPlant:
    """Direct simulation of an ARMAX difference equation from zero history."""

    def __init__(self, model: ArmaxModel):
        self.model = model
        nb = len(model.B) + model.d - 1
        self._y = deque([0.0] * max(1, len(model.A) - 1), maxlen=max(1, len(model.A) - 1))
        self._u = deque([0.0] * max(1, nb), maxlen=max(1, nb))
        self._z = deque([0.0] * max(1, len(model.C) - 1), maxlen=max(1, len(model.C) - 1))
        self.y = 0.0

    def step(self, u: float, zeta_next: float = 0.0) -> float:
        """Apply u(k) and the innovation zeta(k+1); return y(k+1)."""
        m = self.model
        self._u.appendleft(float(u))
        a = m.A.coeffs[1:]
        yk = np.fromiter(self._y, float)
        acc = -float(a @ yk[: len(a)]) if len(a) else 0.0
        ud = np.fromiter(self._u, float)[m.d - 1: m.d - 1 + len(m.B)]
        acc += float(m.B.coeffs @ ud) if len(m.B) else 0.0
        if len(m.C):
            c = m.C.coeffs[1:]
            acc += zeta_next + (float(c @ np.fromiter(self._z, float)[: len(c)]) if len(c) else 0.0)
        else:
            acc += zeta_next
        self._y.appendleft(acc)
        self._z.appendleft(float(zeta_next))
        self.y = acc
        return acc


def armax_step(plant: ArmaxPlant, u: float, zeta_next: float = 0.0) -> float:
    return plant.step(u, zeta_next)


class EdlmPlant:
    """Simulation of the incremental model, integrating dy back to y.

    Uses ``w = zeta`` so that it reproduces :class:`ArmaxPlant` for a
    converted model driven by the same innovation sequence.
    """

    def __init__(self, pg: PgModel):
        self.pg = pg
        self.window = RegressorWindow(pg.orders)
        self.y = 0.0
        self._dy = 0.0
        self._u = 0.0
        self._w = 0.0
        self._dw = 0.0

    def step(self, u: float, w_next: float = 0.0) -> float:
        du = u - self._u
        self._u = u
        self.window.push(self._dy, du, self._dw)
        dw_next = w_next - self._w
        dy = edlm_step(self.pg, self.window, dw_next)
        self._w = w_next
        self._dw = dw_next
        self._dy = dy
        self.y += dy
        return self.y


# (y history newest-first, u history newest-first, w(k+1), w history newest-first) -> y(k+1)
PlantFn = Callable[[Sequence[float], Sequence[float], float, Sequence[float]], float]


class FunctionPlant:
    """Wraps a user-supplied single-step difference map (possibly nonlinear)."""

    def __init__(self, fn: PlantFn, history: int = 16):
        self.fn = fn
        self._y = deque([0.0] * history, maxlen=history)
        self._u = deque([0.0] * history, maxlen=history)
        self._w = deque([0.0] * history, maxlen=history)
        self.y = 0.0

    def step(self, u: float, w_next: float = 0.0) -> float:
        self._u.appendleft(float(u))
        y = float(self.fn(tuple(self._y), tuple(self._u), w_next, tuple(self._w)))
        self._y.appendleft(y)
        self._w.appendleft(float(w_next))
        self.y = y
        return y


def load_plant_fn(ref: str) -> PlantFn:
    """Resolve a ``"package.module:function"`` reference."""
    mod, _, attr = ref.partition(":")
    if not mod or not attr:
        raise ValueError(f"plant reference must look like 'module:function', got {ref!r}")
    fn = getattr(importlib.import_module(mod), attr)
    if not callable(fn):
        raise ValueError(f"{ref!r} is not callable")
    return fn
