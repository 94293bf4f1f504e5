"""Incremental self-tuning control on the equivalent-dynamic-linearization model.

Modules: :mod:`istc.poly` (z^-1 polynomial algebra, stability, final values),
:mod:`istc.model` (ARMAX/EDLM models and simulators), :mod:`istc.estimate`
(RLS and projection estimators), :mod:`istc.synth` (controller design and
closed-loop analysis), :mod:`istc.control` (the control law at run time),
:mod:`istc.sim` (closed-loop experiments) and :mod:`istc.cli`.
"""

from .poly import DelayPoly, RationalTf, StabilityVerdict, final_value_limit, is_strictly_stable
from .model import ArmaxModel, ModelOrders, PgModel, armax_to_edlm, darma_to_edlm
from .synth import (
    ControllerPolys,
    DesignSpec,
    PidSpec,
    char_poly,
    closed_loop_report,
    static_error,
    synth_mfac,
    synth_min_phase,
    synth_pole_placement,
)
from .sim import ExperimentConfig, Trajectory, compute_metrics, run_experiment

__version__ = "0.1.0"
