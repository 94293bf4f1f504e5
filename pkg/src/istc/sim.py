"""Deterministic closed-loop experiments: plant, estimator, per-step synthesis, control law.

Noise is reproducible bit-for-bit: sample k of a stream is drawn from
Philox-4x64 keyed by the seed with counter k (the first two 64-bit words
of that block), mapped to uniforms with 53-bit resolution and turned into
a standard normal by the Box-Muller cosine branch.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .control import ControllerState, control_hold, control_step
from .estimate import estimator_init
from .model import (
    ArmaxModel,
    ArmaxPlant,
    FunctionPlant,
    ModelOrders,
    PgModel,
    RegressorWindow,
    load_plant_fn,
)
from .poly import DelayPoly
from .synth import (
    ControllerPolys,
    DesignSpec,
    PidSpec,
    SynthesisError,
    synth_mfac,
    synth_min_phase,
    synth_pole_placement,
)

log = logging.getLogger(__name__)

_TWO53 = 2.0 ** -53


# ---------------------------------------------------------------- signals

def _box_muller(raw: np.ndarray) -> np.ndarray:
    u1 = ((raw[..., 0] >> np.uint64(11)).astype(float) + 1.0) * _TWO53
    u2 = (raw[..., 1] >> np.uint64(11)).astype(float) * _TWO53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def gaussian_noise(seed: int, variance: float, k: int) -> float:
    """Sample k of the zero-mean Gaussian stream for ``seed``."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if variance == 0:
        return 0.0
    raw = np.random.Philox(key=seed, counter=k).random_raw(2)
    return float(math.sqrt(variance) * _box_muller(raw.reshape(1, 2))[0])


def noise_sequence(seed: int, variance: float, n: int) -> np.ndarray:
    """Samples 0..n-1 of the same stream as :func:`gaussian_noise`."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if variance == 0 or n == 0:
        return np.zeros(n)
    raw = np.random.Philox(key=seed).random_raw(4 * n).reshape(n, 4)
    return math.sqrt(variance) * _box_muller(raw[:, :2])


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class Trajectory:
    """Reference ``y*(k)``: ``square`` (amplitude * (-1)**round(k/half_period)),
    ``ramp`` (k * T_s), ``power`` (k**n) or ``constant``."""

    kind: str
    amplitude: float = 10.0
    half_period: int = 100
    T_s: float = 1.0
    n: int = 1
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("square", "ramp", "power", "constant"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "square" and self.half_period <= 0:
            raise ValueError("half_period must be positive")

    def __call__(self, k: int) -> float:
        return trajectory_eval(self, k)


def trajectory_eval(t: Trajectory, k: int) -> float:
    if t.kind == "square":
        return t.amplitude * (-1.0) ** _round_half_away(k / t.half_period)
    if t.kind == "ramp":
        return k * t.T_s
    if t.kind == "power":
        return float(k) ** t.n
    return t.level


@dataclass(frozen=True)
class Disturbance:
    """Additive output disturbance ``v(k)``: ``step`` of ``level`` from ``start`` on."""

    kind: str = "step"
    level: float = 0.0
    start: int = 0

    def __call__(self, k: int) -> float:
        if self.kind == "step":
            return self.level if k >= self.start else 0.0
        raise ValueError(f"unknown disturbance kind {self.kind!r}")


# ---------------------------------------------------------------- controller cases

@dataclass(frozen=True)
class PolePlacementCase:
    """Case 1."""

    A_m: DelayPoly
    B_m: DelayPoly | None = None
    E: DelayPoly | None = None

    def synthesize(self, pg: PgModel) -> ControllerPolys:
        return synth_pole_placement(pg, DesignSpec(self.A_m, self.B_m, self.E))


@dataclass(frozen=True)
class MinPhaseCase:
    """Case 2 (and Case 3 when the orders have L_w = 0)."""

    target_T1: DelayPoly
    pid: PidSpec | None = None
    E: DelayPoly | None = None
    strict: bool = False

    def __post_init__(self):
        if (self.pid is None) == (self.E is None):
            raise ValueError("give exactly one of pid and E")

    def synthesize(self, pg: PgModel) -> ControllerPolys:
        return synth_min_phase(pg, self.target_T1, self.pid if self.pid is not None else self.E,
                               strict=self.strict)


@dataclass(frozen=True)
class MfacCase:
    """Case 4: classic MFAC for ``m = 0``, extra integrators in H for ``m > 0``."""

    lam: float
    m: int = 0

    def synthesize(self, pg: PgModel) -> ControllerPolys:
        return synth_mfac(pg, self.lam, self.m)


ControllerCase = PolePlacementCase | MinPhaseCase | MfacCase


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    plant: ArmaxModel | str
    orders: ModelOrders
    estimator: EstimatorSpec
    controller: ControllerCase
    trajectory: Trajectory
    horizon: int
    seed: int = 0
    noise_variance: float = 0.0
    disturbance: Disturbance | None = None
    u_clamp: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")
        if self.u_clamp is not None and self.u_clamp <= 0:
            raise ValueError("u_clamp must be positive")


# ---------------------------------------------------------------- trace

COLUMNS = ("k", "y_ref", "y", "u", "du", "e")


@dataclass
class Trace:
    k: np.ndarray
    y_ref: np.ndarray
    y: np.ndarray
    u: np.ndarray
    du: np.ndarray
    e: np.ndarray
    phi: np.ndarray
    config_hash: str = ""
    seed: int = 0
    abort_step: int | None = None
    abort_reason: str = ""
    events: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.k)

    @property
    def aborted(self) -> bool:
        return self.abort_step is not None

    def header(self) -> list[str]:
        return list(COLUMNS) + [f"phi_{i + 1}" for i in range(self.phi.shape[1])]

    def to_csv(self, f=None) -> str:
        """CSV with a header row, LF line endings and 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for i in range(len(self)):
            row = [str(int(self.k[i]))]
            row += [format(float(x), ".17g") for x in
                    (self.y_ref[i], self.y[i], self.u[i], self.du[i], self.e[i])]
            row += [format(float(x), ".17g") for x in self.phi[i]]
            w.writerow(row)
        text = buf.getvalue()
        if f is not None:
            f.write(text)
        return text


def read_trace_csv(text: str) -> Trace:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    if tuple(header[:6]) != COLUMNS:
        raise ValueError(f"unexpected trace header {header}")
    return Trace(body[:, 0].astype(int), body[:, 1], body[:, 2], body[:, 3], body[:, 4], body[:, 5],
                 body[:, 6:])


# ---------------------------------------------------------------- runner

def _make_plant(cfg: ExperimentConfig):
    if isinstance(cfg.plant, str):
        return FunctionPlant(load_plant_fn(cfg.plant))
    return ArmaxPlant(cfg.plant)


def _history_len(cfg: ExperimentConfig) -> int:
    o = cfg.orders
    m = getattr(cfg.controller, "m", 0)
    return o.L_y + o.L_u + o.L_w + o.d + m + 4


def run_experiment(cfg: ExperimentConfig) -> Trace:
    """Run one certainty-equivalence closed loop.

    Each step: read y(k), update the regressor and the estimate with
    ``(dH(k-1), dy(k))``, re-synthesize the controller from the estimate,
    apply the law, then advance the plant with fresh noise.  A failed
    synthesis holds ``u(k) = u(k-1)`` and is logged in ``Trace.events``.
    """
    from .config import config_hash

    o = cfg.orders
    n = cfg.horizon
    plant = _make_plant(cfg)
    est = estimator_init(cfg.estimator.kind, o, **cfg.estimator.params)
    window = RegressorWindow(o)
    nbuf = _history_len(cfg)
    cstate = ControllerState(nbuf, nbuf, nbuf)
    zeta = noise_sequence(cfg.seed, cfg.noise_variance, n + 1)
    dist = cfg.disturbance

    cols = {c: np.zeros(n) for c in COLUMNS}
    phi = np.zeros((n, o.n_params))
    tr_events: list[tuple[int, str]] = []
    abort_step, abort_reason = None, ""

    y_plant = 0.0
    y_prev = 0.0
    u_prev = 0.0
    for k in range(n):
        y = y_plant + (dist(k) if dist is not None else 0.0)
        dy = y - y_prev
        dH_prev = window.vector()
        est.update(dH_prev, dy)
        theta = est.theta_hat
        # a-posteriori residual stands in for the unmeasured dw(k)
        dw_hat = float(dy - dH_prev @ theta) if o.L_w else 0.0
        pg = PgModel.from_theta(o, theta)
        y_ref_future = cfg.trajectory(k + o.d)
        try:
            c = cfg.controller.synthesize(pg)
            u = control_step(c, cstate, y_ref_future, y)
        except SynthesisError as exc:
            tr_events.append((k, str(exc)))
            log.debug("step %d: synthesis failed (%s); holding input", k, exc)
            u = control_hold(cstate, y_ref_future, y)
        if cfg.u_clamp is not None and abs(u) > cfg.u_clamp:
            u = math.copysign(cfg.u_clamp, u)
            cstate.du[0] = u - u_prev
            cstate.u_prev = u
        du = u - u_prev
        window.push(dy, du, dw_hat)

        y_ref = cfg.trajectory(k)
        for name, val in zip(COLUMNS, (k, y_ref, y, u, du, y_ref - y)):
            cols[name][k] = val
        phi[k] = theta
        if not (math.isfinite(u) and math.isfinite(y) and np.all(np.isfinite(theta))):
            abort_step, abort_reason = k, "non-finite state (divergence)"
            n = k + 1
            break
        y_prev, u_prev = y, u
        y_plant = plant.step(u, float(zeta[k + 1]))

    return Trace(
        k=cols["k"][:n].astype(int), y_ref=cols["y_ref"][:n], y=cols["y"][:n], u=cols["u"][:n],
        du=cols["du"][:n], e=cols["e"][:n], phi=phi[:n],
        config_hash=config_hash(cfg), seed=cfg.seed,
        abort_step=abort_step, abort_reason=abort_reason, events=tr_events,
    )


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Metrics:
    mean_abs_error: float
    terminal_error: float
    steady_state_error: float
    max_abs_u: float
    window: tuple[int, int]
    relative: bool = False

    def format(self) -> str:
        kind = "relative " if self.relative else ""
        a, b = self.window
        return "\n".join([
            f"mean |{kind}e| on [{a},{b}): {self.mean_abs_error:.10g}",
            f"terminal {kind}error: {self.terminal_error:.10g}",
            f"steady-state {kind}error (tail mean): {self.steady_state_error:.10g}",
            f"max |u|: {self.max_abs_u:.10g}",
        ])


def relative_error(tr: Trace) -> np.ndarray:
    return tr.e / np.maximum(1.0, np.abs(tr.y_ref))


def compute_metrics(tr: Trace, window: tuple[int, int] | None = None, tail: int = 50,
                    relative: bool = False) -> Metrics:
    """Error statistics; ``relative`` divides e(k) by ``max(1, |y*(k)|)``."""
    n = len(tr)
    if n == 0:
        return Metrics(0.0, 0.0, 0.0, 0.0, (0, 0), relative)
    a, b = window if window is not None else (0, n)
    if not 0 <= a < b <= n:
        raise ValueError(f"window [{a},{b}) outside [0,{n})")
    e = relative_error(tr) if relative else tr.e
    tail = max(1, min(tail, n))
    return Metrics(
        mean_abs_error=float(np.mean(np.abs(e[a:b]))),
        terminal_error=float(e[-1]),
        steady_state_error=float(np.mean(e[-tail:])),
        max_abs_u=float(np.max(np.abs(tr.u))),
        window=(a, b),
        relative=relative,
    )


def run_batch(configs: Sequence[ExperimentConfig], workers: int | None = None) -> list[Trace]:
    """Run independent configurations concurrently; results keep input order."""
    from concurrent.futures import ProcessPoolExecutor

    if workers == 1 or len(configs) < 2:
        return [run_experiment(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_experiment, configs))
