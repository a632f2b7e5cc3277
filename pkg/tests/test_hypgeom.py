import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergmod import hypgeom as hg
from bergmod.errors import CapacityExceeded


def test_mobius_identity():
    assert hg.mobius_apply(hg.IDENTITY, 2 + 3j) == 2 + 3j


def test_mobius_S_fixes_i():
    assert abs(hg.mobius_apply(hg.S, 1j) - 1j) < 1e-15


def test_mobius_translation():
    assert abs(hg.mobius_apply(hg.T, 0.3 + 0.7j) - (1.3 + 0.7j)) < 1e-15


def test_automorphy_identity_and_S():
    z = 0.4 + 0.9j
    assert hg.automorphy_J(hg.IDENTITY, z) == 1
    assert hg.automorphy_J(hg.S, z) == z


def test_cocycle_example():
    z = 0.2 + 1.1j
    lhs = hg.automorphy_J(hg.S @ hg.T, z)
    rhs = hg.automorphy_J(hg.S, hg.T.apply(z)) * hg.automorphy_J(hg.T, z)
    assert abs(lhs - rhs) < 1e-12


def _word_element(draw_steps):
    g = hg.IDENTITY
    for s in draw_steps:
        g = g @ (hg.S if s == 9 else hg.translation(s))
    return g


@st.composite
def small_elements(draw):
    steps = draw(st.lists(st.sampled_from([-2, -1, 1, 2, 9]), min_size=0, max_size=5))
    g = _word_element(steps)
    if g.height() > 10:
        g = hg.IDENTITY
    return g


@settings(max_examples=100, deadline=None)
@given(small_elements(), small_elements(),
       st.floats(-2, 2), st.floats(0.2, 3))
def test_cocycle_law_property(g, h, x, y):
    z = complex(x, y)
    lhs = hg.automorphy_J(g @ h, z)
    rhs = hg.automorphy_J(g, h.apply(z)) * hg.automorphy_J(h, z)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=100, deadline=None)
@given(small_elements(), st.floats(-2, 2), st.floats(0.2, 3))
def test_im_transform_property(g, x, y):
    z = complex(x, y)
    gz = g.apply(z)
    assert abs(np.imag(gz) - y / abs(hg.automorphy_J(g, z)) ** 2) < 1e-12


def test_jacobian_identity_and_translation():
    assert hg.jacobian_JD(hg.IDENTITY, 1j) == 1
    assert hg.jacobian_JD(hg.T, 0.3 + 2.2j) == 1


def test_jacobian_matches_finite_difference():
    # central finite difference of z -> -1/z at i
    h = 1e-5
    z = 1j
    fd = (hg.S.apply(z + h) - hg.S.apply(z - h)) / (2 * h)
    assert abs(hg.jacobian_JD(hg.S, z) - fd) < 1e-8


def test_group_element_det_validation():
    with pytest.raises(ValueError):
        hg.GroupElement(1, 1, 1, 1)
    with pytest.raises(ValueError):
        hg.GroupElement(1.0, 0.0, 0.0, 1.0 + 1e-9)


def test_inverse_and_neg():
    g = hg.S @ hg.T @ hg.T
    assert (g @ g.inv()).as_tuple() == (1, 0, 0, 1)
    assert (-g).height() == g.height()


def test_reduce_examples():
    r = hg.reduce_to_fundamental(1j)
    assert r.zstar == 1j and r.gamma.as_tuple() == (1, 0, 0, 1)
    r = hg.reduce_to_fundamental(1 + 1j)
    assert abs(r.zstar - 1j) < 1e-14
    assert r.gamma.as_tuple() == (1, -1, 0, 1)
    r = hg.reduce_to_fundamental(0.1 + 0.1j)
    assert hg.in_fundamental_domain(r.zstar)
    assert abs(r.gamma.apply(0.1 + 0.1j) - r.zstar) < 1e-10


def test_reduce_boundary_ties_prefer_nonpositive_re():
    r = hg.reduce_to_fundamental(0.5 + 2.0j)
    assert np.real(r.zstar) <= 0
    r = hg.reduce_to_fundamental(np.exp(1j * np.pi / 3))  # |z| = 1, Re > 0
    assert np.real(r.zstar) <= 1e-12


def test_reduce_many_matches_scalar(rng):
    zs = rng.uniform(-4, 4, 60) + 1j * np.exp(rng.uniform(np.log(1e-3), 1, 60))
    zstar, a, b, c, d = hg.reduce_many(zs)
    for i, z in enumerate(zs):
        r = hg.reduce_to_fundamental(z)
        assert abs(r.zstar - zstar[i]) < 1e-9
        assert hg.in_fundamental_domain(zstar[i])
        gz = (a[i] * z + b[i]) / (c[i] * z + d[i])
        assert abs(gz - zstar[i]) < 1e-10


def test_enumerate_height1_matches_brute_force():
    got = {g.as_tuple() for g in hg.enumerate_gamma(1)}
    brute = {(a, b, c, d)
             for a in range(-1, 2) for b in range(-1, 2)
             for c in range(-1, 2) for d in range(-1, 2)
             if a * d - b * c == 1}
    assert got == brute


def test_enumerate_height2_matches_brute_force():
    got = {g.as_tuple() for g in hg.enumerate_gamma(2)}
    brute = {(a, b, c, d)
             for a in range(-2, 3) for b in range(-2, 3)
             for c in range(-2, 3) for d in range(-2, 3)
             if a * d - b * c == 1}
    assert got == brute


def test_enumerate_monotone_and_dets():
    e1 = hg.enumerate_gamma(1)
    e2 = hg.enumerate_gamma(2)
    assert {g.as_tuple() for g in e1} <= {g.as_tuple() for g in e2}
    assert all(g.a * g.d - g.b * g.c == 1 for g in e2)


def test_enumerate_deterministic_order():
    e = hg.enumerate_gamma(2)
    keys = [(g.c, g.d, g.a, g.b) for g in e]
    assert keys == sorted(keys)


def test_enumerate_closed_under_neg_and_inv():
    got = {g.as_tuple() for g in hg.enumerate_gamma(3)}
    for tup in got:
        g = hg.GroupElement(*tup)
        assert (-g).as_tuple() in got
        assert g.inv().as_tuple() in got


def test_enumerate_capacity():
    with pytest.raises(CapacityExceeded):
        hg.enumerate_gamma(3, max_count=5)


def test_psl_representatives_cover_half():
    e = hg.enumerate_gamma(2)
    reps = hg.psl_representatives(e)
    assert len(reps) * 2 == len(e)
    tups = {g.as_tuple() for g in reps}
    assert all((-hg.GroupElement(*t)).as_tuple() not in tups for t in tups)


def test_cayley_roundtrip():
    z = 0.37 + 1.81j
    assert abs(hg.cayley_inv(hg.cayley(z)) - z) < 1e-14
    w = 0.3 - 0.4j
    assert abs(hg.cayley(hg.cayley_inv(w)) - w) < 1e-14


def test_point_validation():
    with pytest.raises(ValueError):
        hg.HPoint(0.0, -1.0)
    with pytest.raises(ValueError):
        hg.DPoint(1.0, 0.5)
    p = hg.HPoint.from_complex(1 + 2j)
    assert p.as_complex == 1 + 2j


def test_su11_determinant_and_identity():
    for g in hg.enumerate_gamma(2)[:40]:
        alpha, beta = hg.su11(g)
        assert abs(abs(alpha) ** 2 - abs(beta) ** 2 - 1) < 1e-12
    assert hg.su11(hg.IDENTITY) == (1, 0)
