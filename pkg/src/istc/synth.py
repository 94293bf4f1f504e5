"""Controller synthesis for the incremental self-tuning law and closed-loop analysis.

The law is ``H du(k) = E [y*(k+d) - y(k)] - G dy(k)``.  With the EDLM plant
its characteristic polynomial is

    T = H (1 - z^-1 phi_y) (1 - z^-1) + z^-d phi_u (E + G (1 - z^-1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npp

from .model import PgModel
from .poly import (
    DELTA,
    DelayPoly,
    RationalTf,
    StabilityVerdict,
    factor_delta,
    final_value_limit,
    is_strictly_stable,
)

EPS_H = 1e-8
RESIDUAL_TOL = 1e-9


class SynthesisError(ValueError):
    pass


class SingularGainError(SynthesisError):
    """The leading coefficient h_0 of H is too small to divide by."""


@dataclass(frozen=True)
class ControllerPolys:
    H: DelayPoly
    E: DelayPoly
    G: DelayPoly
    d: int = 1
    verdict: StabilityVerdict | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("H", "E", "G"):
            v = getattr(self, name)
            if not isinstance(v, DelayPoly):
                object.__setattr__(self, name, DelayPoly(v))
        if self.d < 1:
            raise SynthesisError("delay d must be >= 1")
        if len(self.H) == 0 or abs(self.H.coeffs[0]) <= EPS_H:
            raise SingularGainError(f"singular control gain: |h_0| <= {EPS_H}")


@dataclass(frozen=True)
class DesignSpec:
    """Desired poles ``A_m`` and zeros ``B_m`` for pole placement.

    Give ``B_m`` (E is then ``B_m / phi_u``), or ``E`` directly
    (``B_m = phi_u E``), or neither: ``B_m = (1 - z^-1) phi_u c`` with the
    scalar c chosen for unit DC gain of the reference-to-output map.
    """

    A_m: DelayPoly
    B_m: DelayPoly | None = None
    E: DelayPoly | None = None

    def __post_init__(self):
        object.__setattr__(self, "A_m", DelayPoly(self.A_m))
        if self.B_m is not None:
            object.__setattr__(self, "B_m", DelayPoly(self.B_m))
        if self.E is not None:
            object.__setattr__(self, "E", DelayPoly(self.E))
        if self.B_m is not None and self.E is not None:
            raise SynthesisError("give at most one of B_m and E")
        if not is_strictly_stable(self.A_m).stable:
            raise SynthesisError("A_m must be strictly stable")


@dataclass(frozen=True)
class PidSpec:
    k_p: float
    k_i: float
    k_d: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.k_p, self.k_i, self.k_d)):
            raise SynthesisError("PID gains must be finite")


def pid_to_e(pid: PidSpec) -> DelayPoly:
    """``E = k_p (1 - z^-1) + k_i + k_d (1 - 2 z^-1 + z^-2)``."""
    return DelayPoly([pid.k_p + pid.k_i + pid.k_d, -pid.k_p - 2.0 * pid.k_d, pid.k_d])


def _match(columns: list[DelayPoly], rhs: DelayPoly, n_rows: int) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares coefficient matching; returns (x, effective condition)."""
    if len(rhs) > n_rows:
        raise SynthesisError(f"target of degree {rhs.degree} exceeds the attainable degree {n_rows - 1}")
    M = np.column_stack([c.padded(n_rows) for c in columns])
    x, *_ = np.linalg.lstsq(M, rhs.padded(n_rows), rcond=None)
    s = np.linalg.svd(M, compute_uv=False)
    # one null direction (q*b, -q*a) is structural when both H and G are over-sized
    k = min(len(s), n_rows) - 2
    cond = float(s[0] / s[k]) if k >= 0 and s[k] > 0 else math.inf
    return x, cond


def _solve_hg(pg: PgModel, rhs: DelayPoly, with_delta: bool) -> tuple[DelayPoly, DelayPoly, float]:
    """Solve ``[(1 - z^-1 phi_y) H + z^-d phi_u G] * (1 - z^-1 if with_delta) = rhs``.

    All coefficients of H (degree L_u+d-1) and G (degree L_y) are unknown.
    """
    o = pg.orders
    nh, ng = o.L_u + o.d, o.L_y + 1
    a = pg.output_poly()
    b = pg.poly_u.shift(o.d)
    if with_delta:
        a, b = a * DELTA, b * DELTA
    n_rows = o.L_y + o.L_u + o.d + (1 if with_delta else 0)
    cols = [a.shift(i) for i in range(nh)] + [b.shift(j) for j in range(ng)]
    x, cond = _match(cols, rhs, n_rows)
    return DelayPoly(x[:nh]), DelayPoly(x[nh:]), cond


def design_target(pg: PgModel, A_m: DelayPoly) -> DelayPoly:
    """Desired characteristic polynomial ``(1 + z^-1 phi_w)(1 - z^-1) A_m``."""
    return pg.noise_poly() * DELTA * A_m


def synth_pole_placement(pg: PgModel, spec: DesignSpec) -> ControllerPolys:
    """General pole-zero placement (Case 1)."""
    o = pg.orders
    A_m = spec.A_m
    if A_m.degree + o.L_w > o.L_y + o.L_u + o.d - 1:
        raise SynthesisError(
            f"degree condition violated: deg A_m + L_w = {A_m.degree + o.L_w} > "
            f"L_y + L_u + d - 1 = {o.L_y + o.L_u + o.d - 1}")
    phi_u = pg.poly_u
    phi_u1 = float(np.real(phi_u(1.0)))
    if abs(phi_u1) <= EPS_H:
        raise SynthesisError("phi_u(1) = 0: input has no DC authority")

    if spec.E is not None:
        E = spec.E
        B_m = phi_u * E
    elif spec.B_m is not None:
        B_m = spec.B_m
        if abs(B_m(1.0)) > RESIDUAL_TOL * max(1.0, np.max(np.abs(B_m.coeffs), initial=0.0)):
            raise SynthesisError("incompatible DC constraint: B_m(1) must be 0")
        q, r = npp.polydiv(B_m.coeffs, phi_u.coeffs)
        if np.max(np.abs(r), initial=0.0) > RESIDUAL_TOL * max(1.0, np.max(np.abs(B_m.coeffs))):
            raise SynthesisError("unattainable zero polynomial: B_m is not a multiple of phi_u")
        E = DelayPoly(q)
    else:
        c = float(np.real(pg.noise_poly()(1.0) * A_m(1.0))) / phi_u1
        E = DELTA * c
        B_m = phi_u * E
    if abs(B_m(1.0)) > RESIDUAL_TOL * max(1.0, np.max(np.abs(B_m.coeffs), initial=0.0)):
        raise SynthesisError("incompatible DC constraint: B_m(1) must be 0")
    if B_m.degree > o.L_y + o.L_u:
        raise SynthesisError(f"deg B_m = {B_m.degree} exceeds L_y + L_u = {o.L_y + o.L_u}")

    target = design_target(pg, A_m)
    rhs = target - phi_u.shift(o.d) * E
    H, G, cond = _solve_hg(pg, rhs, with_delta=True)
    c = ControllerPolys(H, E, G, o.d)
    resid = (char_poly(pg, c) - target).coeffs
    if np.max(np.abs(resid), initial=0.0) > RESIDUAL_TOL * max(1.0, np.max(np.abs(target.coeffs))):
        raise SynthesisError(
            "singular matching system (common factor between 1 - z^-1 phi_y and z^-d phi_u?); "
            f"effective condition number {cond:.3g}, residual {np.max(np.abs(resid)):.3g}")
    return ControllerPolys(H, E, G, o.d, is_strictly_stable(target))


def synth_min_phase(pg: PgModel, target_T1: DelayPoly, pid: PidSpec | DelayPoly,
                    strict: bool = True) -> ControllerPolys:
    """Case 2: place the roots of ``(1 - z^-1 phi_y) H + z^-d phi_u G = T1``, E in PID form.

    ``strict`` enforces the minimum-phase and stable-T1 preconditions;
    adaptive loops relax it while the estimate is still poor.
    """
    o = pg.orders
    target_T1 = DelayPoly(target_T1)
    if strict:
        if not _min_phase(pg.poly_u):
            raise SynthesisError("phi_u is not minimum phase; Case 2 design does not apply")
        if not is_strictly_stable(target_T1).stable:
            raise SynthesisError("target T1 must be strictly stable")
    E = pid_to_e(pid) if isinstance(pid, PidSpec) else DelayPoly(pid)
    H, G, cond = _solve_hg(pg, target_T1, with_delta=False)
    c = ControllerPolys(H, E, G, o.d)
    inner = pg.output_poly() * H + pg.poly_u.shift(o.d) * G
    resid = (inner - target_T1).coeffs
    if np.max(np.abs(resid), initial=0.0) > RESIDUAL_TOL * max(1.0, np.max(np.abs(target_T1.coeffs))):
        raise SynthesisError(
            f"singular matching system; effective condition number {cond:.3g}, "
            f"residual {np.max(np.abs(resid)):.3g}")
    verdict = is_strictly_stable(char_poly(pg, c)) if strict else None
    return ControllerPolys(H, E, G, o.d, verdict)


def t1_for_char_target(pg: PgModel, E: DelayPoly | PidSpec, D: DelayPoly) -> DelayPoly:
    """Pick T1 so that the full Case 2 characteristic polynomial is a scaled ``D``.

    ``D`` is rescaled to ``D(1) = phi_u(1) E(1)`` (required by DC tracking);
    then ``T1 = (D - z^-d phi_u E) / (1 - z^-1)``.
    """
    E = pid_to_e(E) if isinstance(E, PidSpec) else DelayPoly(E)
    D = DelayPoly(D)
    loop = pg.poly_u.shift(pg.orders.d) * E
    gain = loop(1.0)
    if abs(gain) < EPS_H or abs(D(1.0)) < EPS_H:
        raise SynthesisError("zero loop gain at z = 1; no Case 2 target with integral action")
    m, T1 = factor_delta(D * (gain / D(1.0)) - loop)
    if m < 1:
        raise SynthesisError("target does not reduce by the difference operator")
    return T1


def _min_phase(p: DelayPoly) -> bool:
    return p.degree < 1 or is_strictly_stable(p).stable


def synth_mfac(pg: PgModel, lam: float, m_integrators: int = 0) -> ControllerPolys:
    """Case 4: ``H = lam (1 - z^-1)^m + phi2 phi_u``, ``E = phi2``, ``G = phi2 phi_y``.

    ``m_integrators = 0`` is the classic compact/full-form MFAC law.
    """
    if pg.orders.d != 1:
        raise SynthesisError("the MFAC design is defined for d = 1")
    if lam < 0:
        raise SynthesisError("lambda must be non-negative")
    if m_integrators < 0:
        raise SynthesisError("number of integrators must be non-negative")
    phi2 = pg.lead_gain
    H = DelayPoly.delta(m_integrators) * lam + pg.poly_u * phi2
    return ControllerPolys(H, DelayPoly([phi2]), pg.poly_y * phi2, 1)


def char_poly(pg: PgModel, c: ControllerPolys) -> DelayPoly:
    return c.H * pg.output_poly() * DELTA + pg.poly_u.shift(c.d) * (c.E + c.G * DELTA)


def error_tf(pg: PgModel, c: ControllerPolys) -> RationalTf:
    """``y*(k) -> e(k) = y*(k) - y(k)``."""
    T = char_poly(pg, c)
    return RationalTf(T - pg.poly_u * c.E, T)


@dataclass(frozen=True)
class ClosedLoopReport:
    char_poly: DelayPoly
    verdict: StabilityVerdict
    tf_ref_to_y: RationalTf
    tf_ref_to_u: RationalTf
    tf_dist_to_y: RationalTf
    tf_noise_to_y: RationalTf
    tf_ref_to_err: RationalTf
    static_errors: dict[str, float]

    def format(self) -> str:
        lines = ["characteristic polynomial (ascending powers of z^-1):",
                 "  " + " ".join(f"{x:.10g}" for x in self.char_poly.coeffs),
                 "roots (z-plane):"]
        for r in self.verdict.roots:
            lines.append(f"  {r.real:+.5f} {r.imag:+.5f}j   |z| = {abs(r):.5f}")
        lines.append(f"verdict: {self.verdict}")
        lines.append("static errors:")
        for name, v in self.static_errors.items():
            lines.append(f"  {name:10s} {_fmt_limit(v)}")
        return "\n".join(lines)


def _fmt_limit(v: float) -> str:
    if math.isnan(v):
        return "undefined (unstable loop)"
    if math.isinf(v):
        return "diverges"
    return f"{v:.10g}"


def input_class_params(input_class: str, T_s: float = 1.0, n: int | None = None) -> tuple[int, float]:
    """(pole order at z = 1, transform numerator at z = 1) of a reference class."""
    if input_class == "step":
        return 1, 1.0
    if input_class == "ramp":
        return 2, T_s
    if input_class == "power":
        if n is None or n < 0:
            raise ValueError("power input needs an exponent n >= 0")
        return n + 1, math.factorial(n) * T_s ** n
    raise ValueError(f"unknown input class {input_class!r}")


def static_error(pg: PgModel, c: ControllerPolys, input_class: str = "step", *,
                 T_s: float = 1.0, n: int | None = None) -> float:
    """Steady-state tracking error by the final-value theorem; ``+-inf`` if it grows without bound."""
    f = error_tf(pg, c)
    # unit roots of T are tolerated only where the error numerator cancels them
    p_den, red_den = factor_delta(f.den)
    p_num, _ = factor_delta(f.num)
    if p_num < p_den or (red_den.degree >= 1 and not is_strictly_stable(red_den).stable):
        raise SynthesisError("limit undefined for unstable system")
    order, num1 = input_class_params(input_class, T_s, n)
    return final_value_limit(f, order, num1)


def closed_loop_report(pg: PgModel, c: ControllerPolys, powers: tuple[int, ...] = (2,),
                       T_s: float = 1.0) -> ClosedLoopReport:
    T = char_poly(pg, c)
    verdict = is_strictly_stable(T)
    errors: dict[str, float] = {}
    for name, kw in [("step", {}), ("ramp", {"T_s": T_s})] + [(f"power({p})", {"n": p}) for p in powers]:
        cls = name.split("(")[0]
        try:
            errors[name] = static_error(pg, c, cls, **kw)
        except (SynthesisError, ValueError):
            errors[name] = math.nan
    return ClosedLoopReport(
        char_poly=T,
        verdict=verdict,
        tf_ref_to_y=RationalTf(pg.poly_u.shift(c.d) * c.E, T),
        tf_ref_to_u=RationalTf(c.E * pg.output_poly(), T),
        tf_dist_to_y=RationalTf(c.H * DELTA, T),
        tf_noise_to_y=RationalTf(c.H * pg.noise_poly() * DELTA, T),
        tf_ref_to_err=error_tf(pg, c),
        static_errors=errors,
    )

