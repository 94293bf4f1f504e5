import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

from istc.poly import (
    DELTA,
    DelayPoly,
    RationalTf,
    factor_delta,
    final_value_limit,
    is_strictly_stable,
    poly_arith,
    poly_eval,
    poly_mul,
    z_roots,
)

coef = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
polys = st.lists(coef, min_size=1, max_size=7).map(DelayPoly)


def test_trim_and_degree():
    p = DelayPoly([1.0, 2.0, 0.0, 1e-14])
    assert p.tolist() == [1.0, 2.0]
    assert p.degree == 1
    z = DelayPoly([0.0, 0.0])
    assert z.is_zero() and z.degree == -math.inf


def test_arith_examples():
    assert poly_arith(DelayPoly([1, -1]), DelayPoly([0, 1]), "add").tolist() == [1.0]
    p = DelayPoly([0.3, -1.2, 4.0])
    assert poly_arith(p, p, "sub").is_zero()
    assert np.allclose(poly_arith(DelayPoly([0.5, -0.3]), None, "scale", 2).coeffs, [1.0, -0.6])


def test_mul_examples():
    assert np.allclose(poly_mul(DelayPoly([1, -1]), DelayPoly([1, 0.8])).coeffs, [1, -0.2, -0.8])
    p = DelayPoly([0.2, 0.7, -3])
    assert poly_mul(DelayPoly([1]), p).allclose(p)
    assert np.allclose(poly_mul(DelayPoly([1, -2, 1]), DelayPoly([1, 0.8])).coeffs, [1, -1.2, -0.6, 0.8])


def test_eval_examples():
    assert poly_eval(DELTA, 1) == 0
    assert poly_eval(DelayPoly([-0.5, 0.2]), 1) == pytest.approx(-0.3)
    assert poly_eval(DelayPoly([1, 0.4]), 1) == pytest.approx(1.4)


def test_root_examples():
    assert np.allclose(sorted(z_roots(DelayPoly([1, -1.5, 0.5])).real), [0.5, 1.0])
    r = sorted(z_roots(DelayPoly([5.25, -1.1, -4])).real)
    assert r == pytest.approx([-0.77438, 0.98391], abs=1e-4)
    assert z_roots(DelayPoly([1, -0.5])) == pytest.approx([0.5])
    with pytest.raises(ValueError, match="no roots"):
        z_roots(DelayPoly([3.0]))
    with pytest.raises(ValueError, match="no roots"):
        z_roots(DelayPoly())


def test_stability_examples():
    v = is_strictly_stable(DelayPoly([1, -1.5, 0.5]))
    assert not v.stable and v.max_modulus == pytest.approx(1.0)
    v = is_strictly_stable(DelayPoly([0.25, -0.1]))
    assert v.stable and v.roots == pytest.approx([0.4])
    v = is_strictly_stable(DelayPoly([1]))
    assert v.stable and v.margin == 1.0
    with pytest.raises(ValueError):
        is_strictly_stable(DelayPoly())


def test_factor_delta_examples():
    m, r = factor_delta(DelayPoly([1, -2, 1]))
    assert m == 2 and r.allclose(DelayPoly([1]))
    m, r = factor_delta(DelayPoly([1, -1.5, 0.5]))
    assert m == 1 and r.allclose(DelayPoly([1, -0.5]))
    m, r = factor_delta(DelayPoly([0.25, -0.1]))
    assert m == 0 and r.allclose(DelayPoly([0.25, -0.1]))


def test_final_value_examples():
    # MFAC error transfer on the incremental plant, lambda = 5: (T - phi_u E) / T
    T = DelayPoly([5.25, -1.1, -4])
    num = T - DelayPoly([-0.5, 0.2]) * -0.5
    assert final_value_limit(RationalTf(num, T), 2, 1.0) == pytest.approx(60.0, abs=1e-10)
    # lambda = 0: T = phi2 * phi_u, and the error numerator cancels exactly
    T0 = DelayPoly([-0.5, 0.2]) * -0.5
    assert final_value_limit(RationalTf(T0 - DelayPoly([-0.5, 0.2]) * -0.5, T0), 2) == 0.0
    # unit-step through any loop whose error numerator carries one difference operator
    assert final_value_limit(RationalTf(DELTA * DelayPoly([1, 0.3]), DelayPoly([1, -0.2])), 1) == 0.0


def test_final_value_diverges_and_indeterminate():
    f = RationalTf(DELTA * DelayPoly([2.0]), DelayPoly([1, -0.5]))
    assert final_value_limit(f, 3) == math.inf
    assert final_value_limit(RationalTf(-f.num, f.den), 3) == -math.inf
    with pytest.raises(ValueError, match="indeterminate"):
        final_value_limit(RationalTf(DelayPoly([1.0]), DELTA), 1)


@given(polys, polys, polys)
def test_distributive(a, b, c):
    assert ((a + b) * c).allclose(a * c + b * c, atol=1e-9)


@given(st.integers(0, 4), st.lists(coef, min_size=1, max_size=5))
def test_factor_delta_roundtrip(m, c):
    base = DelayPoly(c)
    if base.is_zero() or abs(base(1.0)) < 1e-3:
        return
    p = DelayPoly.delta(m) * base
    m2, red = factor_delta(p)
    assert m2 == m
    assert (DelayPoly.delta(m2) * red).allclose(p, atol=1e-9)


@settings(max_examples=60)
@given(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=8), st.lists(st.booleans(), min_size=8, max_size=8),
       st.floats(0.5, 3))
def test_roots_reexpand(rts, signs, lead):
    rts = [-r if s else r for r, s in zip(rts, signs)]
    # p(z^-1) = lead * prod(1 - r z^-1)
    p = DelayPoly([lead])
    for r in rts:
        p = p * DelayPoly([1, -r])
    got = z_roots(p)
    monic = np.poly(got).real
    assert np.allclose(monic, p.coeffs / p.coeffs[0], atol=1e-9)


def _fv_case(rng):
    while True:
        den = DelayPoly(np.r_[1.0, rng.uniform(-0.6, 0.6, rng.integers(1, 4))])
        if is_strictly_stable(den).margin > 0.1:
            break
    p = int(rng.integers(0, 3))
    num = DelayPoly.delta(p) * DelayPoly(rng.uniform(-1, 1, rng.integers(1, 3)) + [1.0])
    n = int(rng.integers(0, p + 1))  # limit is finite
    return RationalTf(num, den), n


def test_final_value_matches_filter_simulation():
    rng = np.random.default_rng(11)
    for _ in range(20):
        f, n = _fv_case(rng)
        k = np.arange(5000, dtype=float)
        r = k ** n
        e = lfilter(f.num.coeffs, f.den.coeffs, r)
        lim = final_value_limit(f, n + 1, math.factorial(n))
        assert e[-1] == pytest.approx(lim, rel=0.01, abs=1e-6)


def test_rational_filter_matches_lfilter():
    f = RationalTf(DelayPoly([1, 0.5]), DelayPoly([1, -0.3]))
    x = np.linspace(-1, 1, 30)
    assert np.allclose(f.filter(x), lfilter([1, 0.5], [1, -0.3], x))
    assert f.dc_gain() == pytest.approx(1.5 / 0.7)
