import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from istc.model import (
    ArmaxModel,
    ArmaxPlant,
    EdlmPlant,
    FunctionPlant,
    ModelOrders,
    PgModel,
    RegressorWindow,
    armax_step,
    armax_to_edlm,
    darma_to_edlm,
    edlm_step,
    edlm_to_armax,
    load_plant_fn,
    min_orders,
    regressor_push,
)
from istc.poly import DelayPoly
from istc.sim import noise_sequence

P_DELAY = ArmaxModel(DelayPoly([1, -1.5, 0.5]), DelayPoly([0.1, 0.05]), DelayPoly([1, 0.4]), d=6)
P_INCR = ArmaxModel(DelayPoly([1, 0.8]), DelayPoly([-0.5, 0.2]), d=1)


def test_orders_validation():
    with pytest.raises(ValueError):
        ModelOrders(0, 1)
    with pytest.raises(ValueError):
        ModelOrders(1, 1, -1)
    assert ModelOrders(2, 2, 1, 6).n_params == 5


def test_convert_delay_plant():
    pg = armax_to_edlm(P_DELAY, ModelOrders(2, 2, 1, 6))
    assert pg.phi_y.tolist() == [1.5, -0.5]
    assert pg.phi_u.tolist() == [0.1, 0.05]
    assert pg.phi_w.tolist() == [0.4]


def test_convert_incr_plant_and_trivial():
    pg = darma_to_edlm(P_INCR, ModelOrders(1, 2))
    assert pg.phi_y.tolist() == [-0.8] and pg.phi_u.tolist() == [-0.5, 0.2] and pg.orders.d == 1
    pg = armax_to_edlm(ArmaxModel(DelayPoly([1]), DelayPoly([2.5])), ModelOrders(1, 1))
    assert pg.phi_y.tolist() == [0.0] and pg.phi_u.tolist() == [2.5]
    pg = darma_to_edlm(ArmaxModel(DelayPoly([1, -0.5]), DelayPoly([1])), ModelOrders(1, 1))
    assert pg.phi_y.tolist() == [0.5] and pg.phi_u.tolist() == [1.0]
    pg = darma_to_edlm(ArmaxModel(DelayPoly([1]), DelayPoly([1]), d=4), ModelOrders(1, 1, 0, 4))
    assert pg.phi_y.tolist() == [0.0] and pg.phi_u.tolist() == [1.0]


def test_convert_orders_too_small():
    with pytest.raises(ValueError, match="L_w >= 1"):
        armax_to_edlm(P_DELAY, ModelOrders(2, 2, 0, 6))
    with pytest.raises(ValueError, match="L_y >= 2"):
        armax_to_edlm(P_DELAY, ModelOrders(1, 2, 1, 6))
    with pytest.raises(ValueError, match="d == 6"):
        armax_to_edlm(P_DELAY, ModelOrders(2, 2, 1, 1))
    with pytest.raises(ValueError):
        darma_to_edlm(P_DELAY, ModelOrders(2, 2, 1, 6))


def test_round_trip_is_exact():
    for m in (P_DELAY, P_INCR):
        back = edlm_to_armax(armax_to_edlm(m, min_orders(m)))
        assert back.A == m.A and back.B == m.B and back.C == m.C and back.d == m.d


def test_pg_invariants():
    o = ModelOrders(2, 1)
    with pytest.raises(ValueError):
        PgModel(o, [1.0], [1.0])
    with pytest.raises(ValueError, match="bound"):
        PgModel(o, [3.0, 0.0], [4.0], bound_b=4.9)
    pg = PgModel.from_theta(ModelOrders(1, 2, 1), [0.1, 0.2, 0.3, 0.4])
    assert pg.theta.tolist() == [0.1, 0.2, 0.3, 0.4]
    assert pg.noise_poly().tolist() == [1.0, 0.4]
    assert pg.check_noise_stable()
    assert not PgModel(ModelOrders(1, 1, 1), [0], [1], [1.5]).check_noise_stable()


def test_armax_validation():
    with pytest.raises(ValueError, match="monic"):
        ArmaxModel(DelayPoly([2, 1]), DelayPoly([1]))
    with pytest.raises(ValueError, match="monic"):
        ArmaxModel(DelayPoly([1]), DelayPoly([1]), DelayPoly([0.5]))


def test_armax_step_examples():
    pl = ArmaxPlant(P_DELAY)
    assert armax_step(pl, 0.0, 0.0) == 0.0
    # force y(k) = 1 with a unit innovation, then y(k+1) = 1.5 * 1 + 0.4 * zeta(k)
    pl = ArmaxPlant(ArmaxModel(P_DELAY.A, P_DELAY.B, d=6))
    assert pl.step(0.0, 1.0) == 1.0
    assert pl.step(0.0, 0.0) == pytest.approx(1.5)
    pl = ArmaxPlant(P_INCR)
    assert pl.step(1.0) == pytest.approx(-0.5)


def test_edlm_step_examples():
    pg = darma_to_edlm(P_INCR, ModelOrders(1, 2))
    w = RegressorWindow(pg.orders)
    assert edlm_step(pg, w, 0.0) == 0.0
    regressor_push(w, 1.0, 0.0)
    assert edlm_step(pg, w, 0.0) == pytest.approx(-0.8)
    assert edlm_step(pg, w, 0.25) == pytest.approx(-0.55)


def test_regressor_window_layout():
    w = RegressorWindow(ModelOrders(2, 2, 1, 1))
    w.push(1, 2, 3)
    assert w.vector().tolist() == [1, 0, 2, 0, 3]
    w.push(4, 5, 6)
    w.push(7, 8, 9)
    # oldest dy dropped after L_y pushes
    assert w.vector().tolist() == [7, 4, 8, 5, 9]


def test_regressor_delay_alignment():
    w = RegressorWindow(ModelOrders(2, 2, 0, 6))
    w.push(0.0, 1.0)
    for lag in range(1, 6):
        assert w.vector()[2] == 0.0
        w.push(0.0, 0.0)
    # five pushes later the input pushed first sits in the du(k-5) slot
    assert w.vector()[2] == 1.0


def _lti_pair(m, orders, n=1000, seed=3):
    zeta = noise_sequence(seed, m.noise_variance or 0.01, n + 1)
    u = np.sin(0.05 * np.arange(n)) + noise_sequence(seed + 1, 1.0, n)
    a, b = ArmaxPlant(m), EdlmPlant(armax_to_edlm(m, orders))
    ya = [a.step(u[k], zeta[k + 1]) for k in range(n)]
    yb = [b.step(u[k], zeta[k + 1]) for k in range(n)]
    return np.array(ya), np.array(yb)


def test_lti_equivalence_delay_plant():
    ya, yb = _lti_pair(P_DELAY, min_orders(P_DELAY))
    assert np.max(np.abs(ya - yb)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=1, max_size=2),
       st.lists(st.floats(-1, 1), min_size=1, max_size=3),
       st.lists(st.floats(-0.6, 0.6), min_size=0, max_size=2),
       st.integers(1, 3))
def test_lti_equivalence_random(a, b, c, d):
    m = ArmaxModel(DelayPoly([1] + a), DelayPoly(b or [1.0]), DelayPoly([1] + c), d=d)
    o = min_orders(m)
    # padding orders beyond the minimum must not change anything
    o = ModelOrders(o.L_y + 1, o.L_u, o.L_w, o.d)
    ya, yb = _lti_pair(m, o, n=300)
    assert np.max(np.abs(ya - yb)) <= 1e-10 * max(1.0, np.max(np.abs(ya)))


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_edlm_step_linear(h1, h2):
    pg = PgModel(ModelOrders(2, 1, 1), [0.3, -0.2], [0.7], [0.1])
    outs = []
    for h in (h1, h2, np.add(h1, h2)):
        w = RegressorWindow(pg.orders)
        w.push(h[1], 0.0, 0.0)
        w.push(h[0], h[2], h[3])
        outs.append(edlm_step(pg, w, 0.0))
    assert outs[2] == pytest.approx(outs[0] + outs[1], abs=1e-12)


def lag_plant(y_hist, u_hist, w_next, w_hist):
    return 0.5 * y_hist[0] + u_hist[0] + w_next


def test_function_plant_matches_armax():
    f = FunctionPlant(load_plant_fn("test_model:lag_plant"))
    a = ArmaxPlant(ArmaxModel(DelayPoly([1, -0.5]), DelayPoly([1.0])))
    for k in range(20):
        assert f.step(np.cos(k), 0.01 * k) == pytest.approx(a.step(np.cos(k), 0.01 * k))


def test_load_plant_fn_errors():
    with pytest.raises(ValueError):
        load_plant_fn("no_colon")
    with pytest.raises(ValueError):
        load_plant_fn("math:pi")
