import json

import numpy as np
import pytest

from bergmod import hypgeom as hg, modforms as mf, quad
from bergmod.errors import (EmptySpace, NotCuspidal, RankDeficientWarning,
                            TailTooLarge, WeightMismatch)


# -- series construction -------------------------------------------------------

def test_eisenstein_first_coefficients():
    e4 = mf.eisenstein_qexp(4, 10)
    e6 = mf.eisenstein_qexp(6, 10)
    assert e4.coeffs[0] == 1 and e6.coeffs[0] == 1
    # brute-force divisor sums: sigma_3(1) = 1, sigma_5(1) = 1
    assert e4.coeffs[1] == 240
    assert e6.coeffs[1] == -504
    assert e4.coeffs[2] == 240 * mf.sigma(2, 3)
    assert e6.coeffs[3] == -504 * mf.sigma(3, 5)


def test_eisenstein_guards():
    with pytest.raises(ValueError):
        mf.eisenstein_qexp(8, 10)
    with pytest.raises(ValueError):
        mf.eisenstein_qexp(4, 0)


def test_delta_matches_direct_product_oracle():
    M = 40
    # direct polynomial product q prod (1 - q^n)^24, no Euler shortcuts
    poly = [1]
    for n in range(1, M):
        factor = [0] * (n + 1)
        factor[0], factor[n] = 1, -1
        for _ in range(24):
            poly = mf.qmul(poly, factor, M - 1)
    oracle = [0] + poly
    delta = mf.delta_qexp(M)
    assert delta.coeffs == oracle
    assert delta.coeffs[0] == 0 and delta.cuspidal
    assert delta.coeffs[1] == 1 and delta.coeffs[2] == -24


def test_delta_discriminant_relation_exact():
    M = 200
    e4 = mf.eisenstein_qexp(4, M)
    e6 = mf.eisenstein_qexp(6, M)
    delta = mf.delta_qexp(M)
    lhs = [a - b for a, b in zip(mf.qpow(e4.coeffs, 3, M), mf.qpow(e6.coeffs, 2, M))]
    assert all(c % 1728 == 0 for c in lhs)
    assert [c // 1728 for c in lhs] == delta.coeffs
    assert delta.is_exact


def test_weight_parity_guard():
    with pytest.raises(ValueError):
        mf.QExpansion(5, [0, 1])
    with pytest.raises(ValueError):
        mf.QExpansion(2, [1])


# -- cusp bases -----------------------------------------------------------------

@pytest.mark.parametrize("k,dim", [(12, 1), (16, 1), (18, 1), (20, 1),
                                   (22, 1), (24, 2), (26, 1)])
def test_cusp_basis_dimensions(k, dim):
    assert mf.dim_cusp_forms(k) == dim
    basis = mf.cusp_basis(k, 60)
    assert len(basis) == dim
    for i, f in enumerate(basis):
        assert f.cuspidal
        # echelon pivots: a_j = delta_ij for j <= dim
        for j in range(1, dim + 1):
            assert f.coeffs[j] == (1 if j == i + 1 else 0)


def test_cusp_basis_guards():
    with pytest.raises(EmptySpace):
        mf.cusp_basis(10, 40)
    with pytest.raises(EmptySpace):
        mf.cusp_basis(13, 40)


def test_petersson_gram_positive_definite(rule_F4):
    for k in (12, 16, 18, 20, 22, 24, 26):
        basis = mf.cusp_basis(k, 200)
        G = np.array([[mf.petersson(f, g, rule_F4) for g in basis] for f in basis])
        assert np.allclose(G, G.conj().T, atol=1e-18)
        assert np.min(np.linalg.eigvalsh(0.5 * (G + G.conj().T))) > 0


# -- evaluation -------------------------------------------------------------------

def test_eval_translate_agrees(delta200):
    direct = mf.eval_form(delta200, 1j)
    translated = mf.eval_form(delta200, 1j + 1)
    assert abs(direct - translated) < 1e-12


def test_eval_automorphy_S(delta200):
    z = 0.3 + 1.4j
    lhs = mf.eval_form(delta200, hg.S.apply(z))
    rhs = z ** 12 * mf.eval_form(delta200, z)
    assert abs(lhs - rhs) < 1e-9


def test_eval_automorphy_random_basis_forms(rng):
    worst = 0.0
    for k in (12, 16, 20, 24):
        for f in mf.cusp_basis(k, 200):
            for _ in range(6):
                g = hg.IDENTITY
                for _ in range(6):
                    step = hg.S if rng.random() < 0.4 else hg.translation(int(rng.integers(-2, 3)))
                    if (g @ step).height() <= 5:
                        g = g @ step
                z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 2.0))
                lhs = mf.eval_form(f, g.apply(z))
                rhs = hg.automorphy_J(g, z) ** k * mf.eval_form(f, z)
                worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1.0))
    assert worst < 1e-8


def test_cusp_decay_profile(delta200):
    ys = np.linspace(2.05, 40, 100)
    vals = np.abs(mf.eval_form_many(delta200, 0.2 + 1j * ys)) * ys ** 6
    assert np.all(np.diff(vals) < 0)


def test_tail_bound_guard():
    small = mf.delta_qexp(8)
    with pytest.raises(TailTooLarge):
        mf.eval_form(small, 0.2 + 0.9j, tail_tol=1e-20)


# -- Petersson --------------------------------------------------------------------

def test_petersson_positive_and_sesquilinear(rule_F4, delta200):
    v = mf.petersson(delta200, delta200, rule_F4)
    assert abs(np.imag(v)) < 1e-20
    assert np.real(v) > 0
    w = mf.petersson(delta200, delta200.scale(1j), rule_F4)
    assert abs(w - (-1j) * v) < 1e-12 * abs(v)


def test_petersson_weight_mismatch(delta200):
    e4d = delta200 * mf.eisenstein_qexp(4, 200)
    with pytest.raises(WeightMismatch):
        mf.petersson(delta200, e4d, quad.fundamental_rule(2))


def test_petersson_stable_under_refinement(delta200):
    v6 = mf.petersson(delta200, delta200, quad.fundamental_rule(6))
    v7 = mf.petersson(delta200, delta200, quad.fundamental_rule(7))
    assert abs(v6 - v7) / abs(v6) < 1e-7


# -- invariant symbols --------------------------------------------------------------

def test_pair_symbol_invariance_against_direct_series(delta200):
    sym = mf.InvariantSymbol.from_pair(delta200, delta200)
    rng = np.random.default_rng(3)
    zs = rng.uniform(-3, 3, 200) + 1j * np.exp(rng.uniform(np.log(0.05), 1.5, 200))
    got = sym(zs)
    # direct, reduction-free evaluation at the original points
    direct = np.array([complex(np.polynomial.polynomial.polyval(
        np.exp(2j * np.pi * z), delta200.coeffs_float())) for z in zs])
    want = np.abs(direct) ** 2 * np.imag(zs) ** 12
    mask = np.imag(zs) > 0.5  # direct series needs moderate |q|
    assert np.max(np.abs(got[mask] - want[mask])) < 1e-8


def test_pair_symbol_requires_cusp_forms():
    e4 = mf.eisenstein_qexp(4, 40)
    with pytest.raises(NotCuspidal):
        mf.InvariantSymbol.from_pair(e4, e4)


def test_symbol_sup_reported_and_cusp_vanishing(pair_sym_12):
    sup = pair_sym_12.sup_on_grid()
    assert np.isfinite(sup) and sup > 0
    far = complex(pair_sym_12(np.array([0.3 + 1000j]))[0])
    assert abs(far) < 1e-300 or abs(far) < sup * 1e-12


def test_constant_symbol():
    one = mf.InvariantSymbol.constant(1.0)
    assert np.allclose(one(np.array([1j, 2j])), 1.0)


# -- Poincare series ----------------------------------------------------------------

def test_poincare_zero_polynomial():
    res = mf.poincare_series(4, [0.0], 0.2 + 1.3j, 4)
    assert res.value == 0


def test_poincare_needs_m_at_least_4():
    with pytest.raises(ValueError):
        mf.poincare_series(3, [1.0], 1j, 4)


def test_poincare_shell_decay():
    for z in (0.1 + 1.2j, 0.3 + 0.9j, -0.2 + 2.0j, 0.45 + 1.05j, 2.5j):
        res = mf.poincare_series(4, [0.3, 0.0, 1.0], z, 9)
        mags = [res.abs_shell_sums[h] for h in range(1, 10)]
        assert all(b < a for a, b in zip(mags[1:], mags[2:]))
        assert res.tail_diagnostic == mags[-1]


def test_poincare_automorphy_within_tail_bound():
    for gamma in (hg.T, hg.S):
        resid, bound = mf.poincare_automorphy_check(4, [0.3, 0.0, 1.0],
                                                    0.1 + 1.2j, gamma, 7)
        assert resid <= bound + 1e-12


def test_poincare_bounded_proxy_stable():
    zs = np.array([0.1 + 0.9j, 0.2 + 1.5j, 0.45 + 1.1j, -0.3 + 1.05j])
    sup = [np.max(mf.poincare_bounded_proxy(4, [0.3, 0.0, 1.0], zs, h))
           for h in (5, 8, 11)]
    assert all(np.isfinite(sup))
    assert sup[1] <= sup[0] * 1.01 and sup[2] <= sup[1] * 1.01


# -- separation -----------------------------------------------------------------------

def test_separation_single_point():
    res = mf.separation_check([2j], [1.0], 6, 5)
    assert res.residual < 1e-8
    assert not res.rank_deficient


def test_separation_zero_targets():
    res = mf.separation_check([1j, 2j], [0.0, 0.0], 6, 5)
    assert res.residual < 1e-14
    assert np.allclose(res.poly_coeffs, 0)


def test_separation_rejects_equivalent_points():
    with pytest.raises(ValueError):
        mf.separation_check([1j, 1j + 1], [1.0, 0.0], 6, 5)


def test_separation_ladder_decreasing():
    ladder, _ = mf.separation_ladder([1j, 2j], [1.0, 0.0], [4, 6, 8, 10], 6)
    assert all(b < a for a, b in zip(ladder, ladder[1:]))


# -- file format ------------------------------------------------------------------------

def test_qexpansion_json_roundtrip(tmp_path, delta200):
    path = tmp_path / "delta.json"
    mf.save_qexpansion(delta200, path)
    back = mf.load_qexpansion(path)
    assert back.weight == 12
    assert back.coeffs == delta200.coeffs
    data = json.loads(path.read_text())
    assert data["format"] == "qexpansion_v1"
    assert data["exact"] is True


def test_qexpansion_json_rejects_unknown_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        mf.load_qexpansion(path)
