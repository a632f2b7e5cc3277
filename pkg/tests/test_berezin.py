import numpy as np
import pytest

from bergmod import berezin as bz, bergman as bg, hypgeom as hg, modforms as mf, quad
from bergmod import toeplitz as tp


@pytest.fixture(scope="module")
def model():
    return bg.BergmanModel(6, 40)


@pytest.fixture(scope="module")
def random_ops(model, rng):
    out = []
    for _ in range(8):
        A = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
        out.append(bg.OperatorMatrix(A / np.linalg.norm(A, 2), model, model))
    return out


def test_symbol_identity_is_one(model, rule_F4):
    SI = bz.symbol_S_many(model.identity_matrix(),
                          ed=bz.eval_data_for_rule(model, rule_F4))
    assert np.max(np.abs(SI - 1)) < 1e-10


def test_symbol_rank_one_projector(model):
    # projector onto the lowest basis vector: S(A)(z) = |u_0(z)|^2 / K_N(z, z)
    P = np.zeros((40, 40), dtype=complex)
    P[0, 0] = 1.0
    A = bg.OperatorMatrix(P, model, model)
    z0 = hg.cayley_inv(0.0)
    assert abs(bz.symbol_S(A, z0) - 1.0) < 1e-12  # only e_0 alive at the origin
    z = 0.3 + 1.7j
    ed = bz.eval_data(model, [z])
    u = ed.blocks[0][:, 0]
    want = abs(u[0]) ** 2 / np.sum(np.abs(u) ** 2)
    assert abs(bz.symbol_S(A, z) - want) < 1e-14


def test_symbol_bounded_by_operator_norm(model, random_ops):
    zs = np.array([0.2 + 1.0j, -0.4 + 1.3j, 3j, 0.1 + 10j])
    ed = bz.eval_data(model, zs)
    for A in random_ops:
        vals = bz.symbol_S_many(A, ed=ed)
        assert np.max(np.abs(vals)) <= A.operator_norm() + 1e-8


def test_two_point_identity_reduces_to_kernel(model):
    z, w = 0.3 + 1.2j, -0.2 + 0.8j
    big = bg.BergmanModel(6, 120)
    K = bz.symbol_two_point(big.identity_matrix(), z, w)
    want = model.kernel(z, w)
    assert abs(K - want) / abs(want) < 1e-10


def test_two_point_adjoint_symmetry(model, random_ops):
    z, w = 0.25 + 1.4j, -0.3 + 2.2j
    for A in random_ops[:4]:
        lhs = bz.symbol_two_point(A.H, z, w)
        rhs = np.conj(bz.symbol_two_point(A, w, z))
        assert abs(lhs - rhs) < 1e-12


def test_two_point_sesqui_holomorphic(model, random_ops):
    # central-difference Cauchy-Riemann residuals: holomorphic in z,
    # anti-holomorphic in w
    A = random_ops[0]
    z, w = 0.2 + 1.3j, -0.1 + 1.6j
    h = 1e-3
    K = lambda a, b: bz.symbol_two_point(A, a, b)
    dx = (K(z + h, w) - K(z - h, w)) / (2 * h)
    dy = (K(z + 1j * h, w) - K(z - 1j * h, w)) / (2 * h)
    assert abs(dx + 1j * dy) / 2 < 1e-5 * max(abs(dx), 1e-9)
    ex = (K(z, w + h) - K(z, w - h)) / (2 * h)
    ey = (K(z, w + 1j * h) - K(z, w - 1j * h)) / (2 * h)
    assert abs(ex - 1j * ey) / 2 < 1e-5 * max(abs(ex), 1e-9)


def test_symbol_Q_equals_S_for_scalar(model, random_ops):
    z = 0.4 + 1.1j
    for A in random_ops[:4]:
        assert abs(bz.symbol_Q(A, z) - bz.symbol_S(A, z)) < 1e-14


def test_symbol_Q_identity_block():
    blk = bg.BlockModel((4, 16), 20)
    Q = bz.symbol_Q(blk.identity_matrix(), 0.3 + 1.5j)
    assert np.max(np.abs(Q - np.eye(2))) < 1e-12


def test_block_symbol_spectral_radius_bounded(rng):
    blk = bg.BlockModel((4, 16), 20)
    for _ in range(20):
        A = rng.standard_normal((blk.dim, blk.dim)) + 1j * rng.standard_normal(
            (blk.dim, blk.dim))
        A = bg.OperatorMatrix(A / np.linalg.norm(A, 2), blk, blk)
        S = bz.symbol_S(A, complex(rng.uniform(-0.4, 0.4), rng.uniform(0.9, 3.0)))
        assert np.max(np.abs(np.linalg.eigvals(S))) <= 1.0 + 1e-10


def test_berezin_symbol_wrapper(model, random_ops):
    sym = bz.BerezinSymbol(random_ops[0])
    z, w = 1j, 2j
    assert sym.at(z) == bz.symbol_S(random_ops[0], z)
    assert sym.two_point(z, w) == bz.symbol_two_point(random_ops[0], z, w)
    norm = sym.two_point_normalized(z, w)
    kid = bz.symbol_two_point(model.identity_matrix(), z, w)
    assert abs(norm - sym.two_point(z, w) / kid) < 1e-14


def test_berezin_transform_constant_and_positivity():
    rule = quad.weighted_disk_rule(6, 4)
    for z in (1j, 0.3 + 1.5j):
        assert abs(bz.berezin_transform(lambda zs: np.ones_like(zs), z, rule) - 1) < 1e-6
    bump = mf.bump_symbol()
    for z in (1j, 2j, 0.2 + 1.2j):
        assert np.real(bz.berezin_transform(bump, z, rule)) >= 0


def test_berezin_transform_consistent_with_toeplitz_symbol(
        model, pair_sym_12, rule_disk_m6_n40, rng):
    # two independent pipelines tied by the smoothing identity: transform at
    # a finer level than the assembly so the rules genuinely differ
    rule_fine = quad.weighted_disk_rule(6, 6)
    T = tp.toeplitz_matrix(pair_sym_12, model, rule_disk_m6_n40)
    scale = pair_sym_12.sup_on_grid()
    for _ in range(20):
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.9, 2.2))
        b = bz.berezin_transform(pair_sym_12, z, rule_fine)
        s = bz.symbol_S(T, z)
        # combined tolerance: quadrature difference plus truncation tail
        assert abs(b - s) < 1e-4 * scale


def test_trace_of_identity_and_error_bar(model, rule_F4):
    t = bz.trace_tau(model.identity_matrix(), rule_F4)
    assert abs(t.value - 1.0) < 1e-12
    assert t.error_bar < 1e-12


def test_trace_adjoint_and_linearity(model, random_ops, rule_F4):
    A, B = random_ops[0], random_ops[1]
    ta = bz.trace_tau(A, rule_F4, with_error=False).value
    tah = bz.trace_tau(A.H, rule_F4, with_error=False).value
    assert abs(np.conj(ta) - tah) < 1e-10
    lhs = bz.trace_tau(2.0 * A + (1 - 1j) * B, rule_F4, with_error=False).value
    rhs = 2.0 * ta + (1 - 1j) * bz.trace_tau(B, rule_F4, with_error=False).value
    assert abs(lhs - rhs) < 1e-12


def test_trace_positivity_and_faithfulness(model, rule_F4, rng):
    for _ in range(50):
        A = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
        A = bg.OperatorMatrix(A + 0.2 * np.eye(40), model, model)
        val = bz.trace_tau(A.H @ A, rule_F4, with_error=False).value
        assert np.imag(val) < 1e-12
        assert np.real(val) > 0


def test_trace_via_Q_constant_symbol_reduces_to_tau(model, random_ops, rule_F4):
    for A in random_ops[:4]:
        lhs = bz.trace_via_Q(A, mf.InvariantSymbol.constant(1.0), rule_F4)
        rhs = bz.trace_tau(A, rule_F4, with_error=False).value
        assert abs(lhs - rhs) < 1e-14


def test_trace_via_Q_identity_reduces_to_mean(model, pair_sym_12, rule_F6):
    lhs = bz.trace_via_Q(model.identity_matrix(), pair_sym_12, rule_F6)
    fv = pair_sym_12(rule_F6.halfplane_nodes, reduced_data=rule_F6.reduced())
    mean = np.dot(rule_F6.weights, fv) / rule_F6.total_weight
    assert abs(lhs - mean) < 1e-16


def test_trace_dual_pipeline_cross_path(model, rule_F6, rule_disk_m6_n40, rng):
    sym = mf.random_invariant_symbol(rng)
    T = tp.toeplitz_matrix(sym, model, rule_disk_m6_n40)
    f = mf.random_invariant_symbol(rng)
    Tf = tp.toeplitz_matrix(f, model, rule_disk_m6_n40)
    A = (1.0 / T.operator_norm()) * T
    lhs = bz.trace_tau(A @ Tf, rule_F6, with_error=False).value
    rhs = bz.trace_via_Q(A, f, rule_F6)
    assert abs(lhs - rhs) < 1e-4


def test_covariance_identity_cases(model, random_ops):
    z = 0.25 + 1.1j
    assert bz.covariance_check(random_ops[0], hg.IDENTITY, z) < 1e-12
    for g in (hg.T, hg.S):
        assert bz.covariance_check(model.identity_matrix(), g, z) < 1e-10


def test_covariance_ladder(rng):
    z = 0.25 + 1.1j
    res = []
    for N in (20, 40, 80):
        mo = bg.BergmanModel(6, N)
        data = np.zeros((N, N), dtype=complex)
        k = N // 4
        data[:k, :k] = rng.standard_normal((k, k))
        A = bg.OperatorMatrix(data, mo, mo)
        res.append(bz.covariance_check(A, hg.T, z))
    assert res[1] < res[0] and res[2] <= res[1] + 1e-14


def test_covariance_block_mixed_weights(rng):
    blk = bg.BlockModel((4, 8), 40)
    data = np.zeros((blk.dim, blk.dim), dtype=complex)
    for i in range(2):
        for j in range(2):
            si, sj = blk.block_slice(i), blk.block_slice(j)
            blkdata = np.zeros((40, 40), dtype=complex)
            blkdata[:6, :6] = rng.standard_normal((6, 6))
            data[si, sj] = blkdata
    A = bg.OperatorMatrix(data, blk, blk)
    res = bz.covariance_check(A, hg.T, 0.3 + 1.2j)
    assert res < 1e-6


def test_symbol_injectivity_rank_proxy(model, rule_F4):
    d = 3
    fields = []
    ed = bz.eval_data_for_rule(model, rule_F4)
    for j in range(d):
        for k in range(d):
            E = np.zeros((40, 40), dtype=complex)
            E[j, k] = 1.0
            A = bg.OperatorMatrix(E, model, model)
            fields.append(np.sqrt(rule_F4.weights) * bz.symbol_S_many(A, ed=ed))
    G = np.stack(fields, axis=1)
    s = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    assert rank == d * d


def test_trace_symbol_invariance_for_toeplitz(model, pair_sym_12,
                                              rule_disk_m6_n40):
    T = tp.toeplitz_matrix(pair_sym_12, model, rule_disk_m6_n40)
    for g in (hg.T, hg.S, hg.S @ hg.T):
        for z in (0.13 + 1.21j, -0.2 + 0.95j):
            a = bz.symbol_S(T, z)
            b = bz.symbol_S(T, g.apply(z))
            assert abs(a - b) < 1e-8


def test_dump_symbol_field_scalar_and_matrix(tmp_path, model, random_ops):
    zs = np.array([1j, 2j, 0.3 + 1.5j])
    vals = bz.symbol_S_many(random_ops[0], zs)
    p = tmp_path / "field.csv"
    bz.dump_symbol_field(p, zs, vals)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "x,y,re,im"
    assert len(lines) == 4
    blk = bg.BlockModel((6, 6), 10)
    valsm = bz.symbol_S_many(blk.identity_matrix(), zs)
    p2 = tmp_path / "field_m.csv"
    bz.dump_symbol_field(p2, zs, valsm)
    head = p2.read_text().splitlines()[0]
    assert head.startswith("x,y,re_00,im_00")
