"""Online PG-vector estimators for certainty-equivalence adaptation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelOrders


class EstimatorError(ValueError):
    pass


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise EstimatorError("non-finite estimator input")


@dataclass
class RlsState:
    """Recursive least squares with unit forgetting factor."""

    theta_hat: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.theta_hat = np.array(self.theta_hat, dtype=float)
        self.P = np.array(self.P, dtype=float)
        n = len(self.theta_hat)
        if self.P.shape != (n, n):
            raise EstimatorError(f"covariance shape {self.P.shape} does not match {n} parameters")

    def update(self, dH: np.ndarray, dy: float) -> float:
        """Update with ``(dH(k-1), dy(k))``; returns the a-priori prediction residual."""
        dH = np.asarray(dH, dtype=float)
        _check_finite(dH, dy)
        if dH.shape != self.theta_hat.shape:
            raise EstimatorError(f"regressor has {dH.shape}, expected {self.theta_hat.shape}")
        resid = float(dy - dH @ self.theta_hat)
        Ph = self.P @ dH
        gain = Ph / (1.0 + dH @ Ph)
        self.theta_hat = self.theta_hat + gain * resid
        P = self.P - np.outer(gain, Ph)
        if np.max(np.abs(P - P.T), initial=0.0) > 1e-6 * max(1.0, np.max(np.abs(P))):
            raise EstimatorError("covariance corrupted: lost symmetry")
        self.P = 0.5 * (P + P.T)
        return resid


def rls_update(s: RlsState, dH: np.ndarray, dy: float) -> float:
    return s.update(dH, dy)


@dataclass
class ProjectionState:
    """Normalized projection estimator with the usual MFAC reset rule.

    ``input_index`` is the position of the leading input gain in the stacked
    vector; a sign flip there relative to the initial estimate triggers a reset.
    """

    phi_hat: np.ndarray
    eta: float = 0.2
    mu: float = 1.0
    eps_reset: float = 1e-5
    input_index: int = 1
    phi_hat_init: np.ndarray = field(default=None)

    def __post_init__(self):
        self.phi_hat = np.array(self.phi_hat, dtype=float)
        if self.phi_hat_init is None:
            self.phi_hat_init = self.phi_hat.copy()
        self.phi_hat_init = np.array(self.phi_hat_init, dtype=float)
        if not 0.0 < self.eta <= 2.0:
            raise EstimatorError(f"eta must lie in (0, 2], got {self.eta}")
        if self.mu <= 0:
            raise EstimatorError(f"mu must be positive, got {self.mu}")
        if self.eps_reset <= 0:
            raise EstimatorError("eps_reset must be positive")

    @property
    def theta_hat(self) -> np.ndarray:
        return self.phi_hat

    def update(self, dH: np.ndarray, dy: float) -> float:
        dH = np.asarray(dH, dtype=float)
        _check_finite(dH, dy)
        if dH.shape != self.phi_hat.shape:
            raise EstimatorError(f"regressor has {dH.shape}, expected {self.phi_hat.shape}")
        resid = float(dy - dH @ self.phi_hat)
        nrm2 = float(dH @ dH)
        self.phi_hat = self.phi_hat + self.eta * dH * resid / (self.mu + nrm2)
        i = self.input_index
        if (np.linalg.norm(self.phi_hat) <= self.eps_reset
                or np.sqrt(nrm2) <= self.eps_reset
                or np.sign(self.phi_hat[i]) != np.sign(self.phi_hat_init[i])):
            self.phi_hat = self.phi_hat_init.copy()
        return resid


def projection_update(s: ProjectionState, dH: np.ndarray, dy: float) -> float:
    return s.update(dH, dy)


@dataclass
class FrozenEstimator:
    """Holds a fixed PG vector; used for non-adaptive runs."""

    theta_hat: np.ndarray

    def __post_init__(self):
        self.theta_hat = np.array(self.theta_hat, dtype=float)

    def update(self, dH: np.ndarray, dy: float) -> float:
        return float(dy - np.asarray(dH, dtype=float) @ self.theta_hat)


def estimator_init(kind: str, orders: ModelOrders, **params):
    """Build an estimator state from table-style parameters.

    ``rls``: ``theta0``, ``P0`` (scalar c for ``c*I``, or a matrix).
    ``projection``: ``theta0``, ``eta``, ``mu``, optional ``eps_reset``.
    ``frozen``: ``theta``.
    """
    n = orders.n_params

    def vec(name):
        if name not in params:
            raise EstimatorError(f"{kind} estimator needs parameter {name!r}")
        v = np.asarray(params[name], dtype=float).ravel()
        if v.size == 1 and n > 1:
            v = np.full(n, float(v[0]))
        if v.size != n:
            raise EstimatorError(f"{name} has {v.size} entries, orders require {n}")
        return v

    if kind == "rls":
        theta0 = vec("theta0")
        if "P0" not in params:
            raise EstimatorError("rls estimator needs parameter 'P0'")
        P0 = np.asarray(params["P0"], dtype=float)
        P0 = P0 * np.eye(n) if P0.ndim == 0 else P0
        return RlsState(theta0, P0)
    if kind == "projection":
        for name in ("eta", "mu"):
            if name not in params:
                raise EstimatorError(f"projection estimator needs parameter {name!r}")
        return ProjectionState(vec("theta0"), eta=float(params["eta"]), mu=float(params["mu"]),
                               eps_reset=float(params.get("eps_reset", 1e-5)),
                               input_index=orders.L_y)
    if kind == "frozen":
        return FrozenEstimator(vec("theta"))
    raise EstimatorError(f"unknown estimator kind {kind!r}")
