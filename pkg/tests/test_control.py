from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from istc.control import ControllerState, control_hold, control_step, controller_reset
from istc.model import ModelOrders, PgModel
from istc.poly import DelayPoly
from istc.synth import ControllerPolys, SingularGainError, synth_mfac

PG_INCR = PgModel(ModelOrders(1, 2), [-0.8], [-0.5, 0.2])


def test_zero_error_holds_input():
    c = ControllerPolys(DelayPoly([1, 0.3]), DelayPoly([0.5, -0.3]), DelayPoly([0.2]))
    s = ControllerState.for_polys(c)
    s.u_prev = 2.5
    assert control_step(c, s, 0.0, 0.0) == 2.5


def test_pure_incremental_proportional():
    c = ControllerPolys(DelayPoly([1]), DelayPoly([1]), DelayPoly())
    s = ControllerState.for_polys(c)
    u = [control_step(c, s, r, 0.0) for r in (1.0, 2.0, -0.5)]
    assert u == pytest.approx([1.0, 3.0, 2.5])


def test_mfac_first_step():
    c = synth_mfac(PG_INCR, 5.0)
    s = ControllerState.for_polys(c)
    assert control_step(c, s, 1.0, 0.0) == pytest.approx(-0.5 / 5.25)


def test_reset():
    c = synth_mfac(PG_INCR, 5.0)
    fresh = ControllerState.for_polys(c)
    s = ControllerState.for_polys(c)
    for k in range(5):
        control_step(c, s, np.sin(k), 0.1 * k)
    controller_reset(s)
    controller_reset(s)
    assert control_step(c, s, 0.0, 0.0) == 0.0
    controller_reset(s)
    assert control_step(c, s, 0.7, 0.2) == control_step(c, fresh, 0.7, 0.2)


def test_errors():
    c = ControllerPolys(DelayPoly([1, 0.1, 0.1]), DelayPoly([1]), DelayPoly())
    with pytest.raises(ValueError, match="history buffers"):
        control_step(c, ControllerState(1, 0, 0), 1.0, 0.0)
    c = ControllerPolys(DelayPoly([1]), DelayPoly([1]), DelayPoly())
    object.__setattr__(c, "H", DelayPoly([0.0, 1.0]))
    with pytest.raises(SingularGainError, match="singular control gain"):
        control_step(c, ControllerState(2, 2, 2), 1.0, 0.0)


def test_hold_records_history():
    c = ControllerPolys(DelayPoly([1]), DelayPoly([0.0, 1.0]), DelayPoly())
    s = ControllerState.for_polys(c)
    s.u_prev = 1.0
    assert control_hold(s, 3.0, 1.0) == 1.0
    # the held step's error (3 - 1) feeds e_1 at the next step
    assert control_step(c, s, 0.0, 1.0) == pytest.approx(3.0)


def test_integrator_under_constant_polys():
    c = ControllerPolys(DelayPoly([2, 0.5]), DelayPoly([0.4, -0.1]), DelayPoly([0.3, 0.1]))
    s = ControllerState.for_polys(c)
    s.u_prev = -1.25
    assert [control_step(c, s, 0.0, 0.0) for _ in range(10)] == [-1.25] * 10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 10))
def test_matches_textbook_mfac(seed, lam):
    rng = np.random.default_rng(seed)
    Ly, Lu = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    s = ControllerState(8, 8, 8)
    u_prev = 0.0
    dU, dY = np.zeros(Lu), np.zeros(Ly)  # newest first
    y_prev = 0.0
    for _ in range(40):
        phi = rng.uniform(-1, 1, Ly + Lu)
        phi[Ly] = rng.choice([-1, 1]) * rng.uniform(0.2, 1)
        pg = PgModel.from_theta(ModelOrders(Ly, Lu), phi)
        c = synth_mfac(pg, lam)
        r, y = rng.normal(), rng.normal()
        dY = np.r_[y - y_prev, dY[:-1]]
        u = control_step(c, s, r, y)
        p2 = phi[Ly]
        textbook = u_prev + p2 * ((r - y) - phi[:Ly] @ dY - phi[Ly + 1:] @ dU[: Lu - 1]) / (lam + p2 * p2)
        assert u == pytest.approx(textbook, abs=1e-12, rel=1e-12)
        dU = np.r_[u - u_prev, dU[:-1]]
        u_prev, y_prev = u, y


@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_linear_in_histories(a, b):
    c = ControllerPolys(DelayPoly([1.5, 0.2, -0.1]), DelayPoly([0.5, -0.3, 0.1]), DelayPoly([0.4, 0.2, 0.05]))

    def run(h):
        s = ControllerState(2, 2, 2)
        s.du = deque(h[0:2], maxlen=2)
        s.err = deque(h[2:4], maxlen=2)
        s.dy = deque(h[4:6], maxlen=2)
        s.y_prev = h[6]
        return control_step(c, s, h[7], h[8])  # u_prev = 0, so u = du

    ab = list(np.add(a, b))
    assert run(ab) == pytest.approx(run(a) + run(b), abs=1e-9)
