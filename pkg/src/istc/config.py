"""JSON experiment configurations and the preset library.

Schema (all polynomials are ascending coefficient lists in z^-1)::

    {
      "name": "ex2_1_mfac",
      "plant": {"kind": "armax", "A": [1, 0.8], "B": [-0.5, 0.2], "C": [], "d": 1}
             | {"kind": "function", "ref": "package.module:step_fn"},
      "orders": {"L_y": 1, "L_u": 2, "L_w": 0, "d": 1},
      "estimator": {"kind": "rls", "theta0": [...], "P0": 1e6}
                 | {"kind": "projection", "theta0": [...], "eta": 0.2, "mu": 1, "eps_reset": 1e-5}
                 | {"kind": "frozen", "theta": [...]},
      "controller": {"case": "mfac", "lambda": 5, "m": 0}
                  | {"case": "min_phase", "target_T1": [1], "pid": {"k_p": 0.3, "k_i": 0.2, "k_d": 0}}
                  | {"case": "min_phase", "target_T1": [1], "E": [0.5, -0.3]}
                  | {"case": "pole_placement", "A_m": [1, -0.5], "B_m": null, "E": null},
      "trajectory": {"kind": "square", "amplitude": 10, "half_period": 100}
                  | {"kind": "ramp", "T_s": 1} | {"kind": "power", "n": 10}
                  | {"kind": "constant", "level": 1},
      "horizon": 2000,
      "seed": 0,
      "noise_variance": 0.0,
      "disturbance": null | {"kind": "step", "level": 1.0, "start": 100},
      "u_clamp": null
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import replace
from typing import Any

from .model import ArmaxModel, ModelOrders, armax_to_edlm
from .poly import DelayPoly
from .sim import (
    Disturbance,
    EstimatorSpec,
    ExperimentConfig,
    MfacCase,
    MinPhaseCase,
    PidSpec,
    PolePlacementCase,
    Trajectory,
)
from .synth import t1_for_char_target


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


def _poly(p) -> list[float] | None:
    return None if p is None else DelayPoly(p).tolist()


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    if isinstance(cfg.plant, str):
        plant = {"kind": "function", "ref": cfg.plant}
    else:
        m = cfg.plant
        plant = {"kind": "armax", "A": m.A.tolist(), "B": m.B.tolist(), "C": m.C.tolist(), "d": m.d}
    o = cfg.orders
    est = {"kind": cfg.estimator.kind, **_jsonable(cfg.estimator.params)}
    c = cfg.controller
    if isinstance(c, MfacCase):
        ctrl = {"case": "mfac", "lambda": c.lam, "m": c.m}
    elif isinstance(c, MinPhaseCase):
        ctrl = {"case": "min_phase", "target_T1": _poly(c.target_T1), "strict": c.strict}
        if c.pid is not None:
            ctrl["pid"] = {"k_p": c.pid.k_p, "k_i": c.pid.k_i, "k_d": c.pid.k_d}
        else:
            ctrl["E"] = _poly(c.E)
    elif isinstance(c, PolePlacementCase):
        ctrl = {"case": "pole_placement", "A_m": _poly(c.A_m), "B_m": _poly(c.B_m), "E": _poly(c.E)}
    else:
        raise ConfigError("controller", f"cannot serialize controller {type(c).__name__}")
    t = cfg.trajectory
    traj: dict[str, Any] = {"kind": t.kind}
    traj.update({"square": {"amplitude": t.amplitude, "half_period": t.half_period},
                 "ramp": {"T_s": t.T_s}, "power": {"n": t.n},
                 "constant": {"level": t.level}}[t.kind])
    dist = None
    if cfg.disturbance is not None:
        dist = {"kind": cfg.disturbance.kind, "level": cfg.disturbance.level,
                "start": cfg.disturbance.start}
    return {
        "name": cfg.name,
        "plant": plant,
        "orders": {"L_y": o.L_y, "L_u": o.L_u, "L_w": o.L_w, "d": o.d},
        "estimator": est,
        "controller": ctrl,
        "trajectory": traj,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "noise_variance": cfg.noise_variance,
        "disturbance": dist,
        "u_clamp": cfg.u_clamp,
    }


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        out[k] = v.tolist() if hasattr(v, "tolist") else v
    return out


def _get(d: dict, key: str, path: str, default=..., kind=None):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    v = d[key]
    if kind is not None and v is not None:
        try:
            v = kind(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}" if path else key, f"bad value {v!r} ({exc})") from None
    return v


def _flist(v) -> list[float]:
    if not isinstance(v, list):
        raise TypeError("expected a list of numbers")
    return [float(x) for x in v]


def config_from_dict(d: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("", "top level must be a JSON object")
    p = _get(d, "plant", "")
    pk = _get(p, "kind", "plant")
    noise_var = _get(d, "noise_variance", "", 0.0, float)
    try:
        if pk == "armax":
            plant = ArmaxModel(
                DelayPoly(_get(p, "A", "plant", kind=_flist)),
                DelayPoly(_get(p, "B", "plant", kind=_flist)),
                DelayPoly(_get(p, "C", "plant", [], _flist)),
                _get(p, "d", "plant", 1, int),
                noise_var,
            )
        elif pk == "function":
            plant = _get(p, "ref", "plant", kind=str)
        else:
            raise ConfigError("plant.kind", f"unknown plant kind {pk!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("plant", str(exc)) from None

    od = _get(d, "orders", "")
    try:
        orders = ModelOrders(_get(od, "L_y", "orders", kind=int), _get(od, "L_u", "orders", kind=int),
                             _get(od, "L_w", "orders", 0, int), _get(od, "d", "orders", 1, int))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("orders", str(exc)) from None

    ed = dict(_get(d, "estimator", ""))
    ek = ed.pop("kind", None)
    if ek not in ("rls", "projection", "frozen"):
        raise ConfigError("estimator.kind", f"unknown estimator kind {ek!r}")
    from .estimate import EstimatorError, estimator_init
    try:
        estimator_init(ek, orders, **ed)
    except (EstimatorError, TypeError, ValueError) as exc:
        raise ConfigError("estimator", str(exc)) from None
    estimator = EstimatorSpec(ek, ed)

    cd = _get(d, "controller", "")
    case = _get(cd, "case", "controller")
    try:
        if case == "mfac":
            controller = MfacCase(_get(cd, "lambda", "controller", kind=float),
                                  _get(cd, "m", "controller", 0, int))
        elif case == "min_phase":
            pid = _get(cd, "pid", "controller", None)
            E = _get(cd, "E", "controller", None, _flist)
            controller = MinPhaseCase(
                DelayPoly(_get(cd, "target_T1", "controller", [1.0], _flist)),
                PidSpec(float(pid["k_p"]), float(pid["k_i"]), float(pid.get("k_d", 0.0)))
                if pid is not None else None,
                DelayPoly(E) if E is not None else None,
                bool(_get(cd, "strict", "controller", False)),
            )
        elif case == "pole_placement":
            B_m = _get(cd, "B_m", "controller", None, _flist)
            E = _get(cd, "E", "controller", None, _flist)
            controller = PolePlacementCase(DelayPoly(_get(cd, "A_m", "controller", kind=_flist)),
                                           DelayPoly(B_m) if B_m is not None else None,
                                           DelayPoly(E) if E is not None else None)
        else:
            raise ConfigError("controller.case", f"unknown controller case {case!r}")
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("controller", str(exc)) from None

    td = _get(d, "trajectory", "")
    try:
        tk = _get(td, "kind", "trajectory")
        trajectory = Trajectory(
            tk,
            amplitude=_get(td, "amplitude", "trajectory", 10.0, float),
            half_period=_get(td, "half_period", "trajectory", 100, int),
            T_s=_get(td, "T_s", "trajectory", 1.0, float),
            n=_get(td, "n", "trajectory", 1, int),
            level=_get(td, "level", "trajectory", 0.0, float),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("trajectory", str(exc)) from None

    dd = _get(d, "disturbance", "", None)
    disturbance = None
    if dd is not None:
        disturbance = Disturbance(_get(dd, "kind", "disturbance", "step", str),
                                  _get(dd, "level", "disturbance", 0.0, float),
                                  _get(dd, "start", "disturbance", 0, int))
    try:
        return ExperimentConfig(
            plant=plant, orders=orders, estimator=estimator, controller=controller,
            trajectory=trajectory,
            horizon=_get(d, "horizon", "", kind=int),
            seed=_get(d, "seed", "", 0, int),
            noise_variance=noise_var,
            disturbance=disturbance,
            u_clamp=_get(d, "u_clamp", "", None, float),
            name=_get(d, "name", "", "", str),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("", str(exc)) from None


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


def loads(text: str) -> ExperimentConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return config_from_dict(d)


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- presets

# the delay-six plant: y(k+1) = 1.5y(k) - 0.5y(k-1) + 0.1u(k-5) + 0.05u(k-6) + xi + 0.4 xi(-1)
DELAY_PLANT = ArmaxModel(DelayPoly([1.0, -1.5, 0.5]), DelayPoly([0.1, 0.05]), DelayPoly([1.0, 0.4]), d=6)
# the incremental plant: dy(k+1) = -0.8dy(k) - 0.5du(k) + 0.2du(k-1), integrated from rest
INCR_PLANT = ArmaxModel(DelayPoly([1.0, 0.8]), DelayPoly([-0.5, 0.2]), d=1)

SQUARE = Trajectory("square", amplitude=10.0, half_period=100)

# No T1 is tabulated for the delay-six plant runs. T1 = [1] leaves a closed-loop
# pole at |z| = 0.966, so we fix T1 once, offline, from the true plant and the
# nominal E = 0.5 - 0.3 z^-1. That puts the full characteristic polynomial at
# (1 - 0.5 z^-1)^2 (up to scale). The adaptive loop still redesigns H and G from
# the estimate at every step.
EX1_E = PidSpec(0.3, 0.2, 0.0)
EX1_T1 = t1_for_char_target(armax_to_edlm(DELAY_PLANT, ModelOrders(2, 2, 1, 6)), EX1_E,
                            DelayPoly([1.0, -1.0, 0.25]))


def _ex1_1(L_w: int) -> ExperimentConfig:
    orders = ModelOrders(2, 2, L_w, 6)
    return ExperimentConfig(
        plant=replace(DELAY_PLANT, noise_variance=0.01),
        orders=orders,
        estimator=EstimatorSpec("rls", {"theta0": [0.001] * orders.n_params, "P0": 1e6}),
        controller=MinPhaseCase(EX1_T1, pid=EX1_E),
        trajectory=SQUARE,
        horizon=400,
        noise_variance=0.01,
        name="ex1_1_case2" if L_w else "ex1_1_case3",
    )


def _ex1_2(k_p: float = 0.3, k_i: float = 0.2) -> ExperimentConfig:
    orders = ModelOrders(2, 2, 0, 6)
    return ExperimentConfig(
        plant=DELAY_PLANT,
        orders=orders,
        estimator=EstimatorSpec("rls", {"theta0": [0.001] * 4, "P0": 1e6}),
        controller=MinPhaseCase(EX1_T1, pid=PidSpec(k_p, k_i, 0.0)),
        trajectory=SQUARE,
        horizon=400,
        name="ex1_2",
    )


def _ex2(m: int | None, lam: float, trajectory: Trajectory, horizon: int, name: str) -> ExperimentConfig:
    return ExperimentConfig(
        plant=INCR_PLANT,
        orders=ModelOrders(1, 2, 0, 1),
        estimator=EstimatorSpec("projection", {"theta0": [-0.1, -0.1, -0.1], "eta": 0.2, "mu": 1.0}),
        controller=MfacCase(lam, m),
        trajectory=trajectory,
        horizon=horizon,
        name=name,
    )


PRESETS = {
    "ex1_1_case2": lambda: _ex1_1(1),
    "ex1_1_case3": lambda: _ex1_1(0),
    "ex1_2": _ex1_2,
    "ex2_1_istc": lambda: _ex2(1, 5.0, Trajectory("ramp", T_s=1.0), 2000, "ex2_1_istc"),
    "ex2_1_mfac": lambda: _ex2(0, 5.0, Trajectory("ramp", T_s=1.0), 2000, "ex2_1_mfac"),
    "ex2_2": lambda: _ex2(0, 5.0, Trajectory("power", n=10), 700, "ex2_2"),
}


# short names used in docs and on the command line
PRESET_ALIASES = {"ex1_1": "ex1_1_case2", "ex2_1": "ex2_1_istc"}


def preset(name: str, **overrides) -> ExperimentConfig:
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    cfg = PRESETS[name]()
    return replace(cfg, **overrides) if overrides else cfg


def ex1_2_variants() -> dict[str, ExperimentConfig]:
    """The three PID settings of the tuning example, keyed by their output labels."""
    return {"y_s": replace(_ex1_2(0.35, 0.15), name="ex1_2_s"),
            "y_m": _ex1_2(0.3, 0.2),
            "y_l": replace(_ex1_2(0.25, 0.25), name="ex1_2_l")}


def ex2_2_sweep(lams=(0.0, 1.0, 5.0), n: int = 10, horizon: int = 700) -> dict[float, ExperimentConfig]:
    return {lam: _ex2(0, lam, Trajectory("power", n=n), horizon, f"ex2_2_lambda{lam:g}") for lam in lams}
