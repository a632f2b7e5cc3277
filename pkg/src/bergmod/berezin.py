"""Berezin symbols, the Berezin transform and the invariant trace.

For a truncated operator A the two-point symbol is K_A(z, w) = <A E_w, E_z>
built from truncated evaluation vectors.  Diagonal symbols are normalised by
the truncated kernel, which makes S(I) = 1 and |S(A)(z)| <= ||A|| hold
exactly at every truncation:

    scalar   S(A)(z) = <A E_z, E_z> / <E_z, E_z>,
    block    S(A)(z)_ij = <A_ij E^j_z, E^i_z> / (n_i(z) n_j(z)),
             Q(A)(z)_ij = <A_ij E^j_z, E^i_z> / n_j(z)^2,

with n_i(z) the norm of the block-i evaluation vector (per-block constants:
n_i(z)^2 approximates c_{m_i} y^{-m_i}).  tr S(A) = tr Q(A) holds exactly.

The trace is tau(A) = (1/mu(F)) integral_F tr_n S(A)(z) dmu(z) with tr_n the
normalised matrix trace, discretised on a fundamental-domain rule and
normalised by the rule's own total weight so tau(I) = 1 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hypgeom, quad
from .bergman import BergmanModel, BlockModel, OperatorMatrix


# -- evaluation-vector tables ---------------------------------------------------

@dataclass
class EvalData:
    """Per-point basis values and block norms for a model.

    blocks[i] has shape (N, npts) holding u_n(z); norms has shape
    (n_blocks, npts).
    """

    blocks: list
    norms: np.ndarray

    @property
    def n_blocks(self):
        return len(self.blocks)


def eval_data(space, zs) -> EvalData:
    zs = np.asarray(zs, dtype=complex)
    models = space.blocks if isinstance(space, BlockModel) else (space,)
    blocks = [mod.halfplane_basis_matrix(zs) for mod in models]
    norms = np.stack([np.linalg.norm(B, axis=0) for B in blocks])
    return EvalData(blocks, norms)


def eval_data_for_rule(space, rule: quad.QuadratureRule) -> EvalData:
    cache = getattr(rule, "_eval_cache", None)
    if cache is None:
        cache = {}
        rule._eval_cache = cache
    if space not in cache:
        cache[space] = eval_data(space, rule.halfplane_nodes)
    return cache[space]


def _pair_values(A: OperatorMatrix, ed: EvalData):
    """K_A(z,z)_ij = <A_ij v_j, v_i> for every point, shape (npts, n, n)."""
    space = A.row_space
    if isinstance(space, BlockModel):
        n = space.n_blocks
        npts = ed.blocks[0].shape[1]
        K = np.empty((npts, n, n), dtype=complex)
        for i in range(n):
            si = space.block_slice(i)
            for j in range(n):
                sj = space.block_slice(j)
                W = A.data[si, sj] @ np.conj(ed.blocks[j])
                K[:, i, j] = np.sum(ed.blocks[i] * W, axis=0)
        return K
    W = A.data @ np.conj(ed.blocks[0])
    vals = np.sum(ed.blocks[0] * W, axis=0)
    return vals[:, None, None]


# -- symbols --------------------------------------------------------------------

def symbol_S_many(A: OperatorMatrix, zs=None, ed: EvalData | None = None):
    """S(A) at many points; shape (npts,) scalar model, (npts, n, n) block."""
    if ed is None:
        ed = eval_data(A.row_space, zs)
    K = _pair_values(A, ed)
    scale = 1.0 / (ed.norms[:, None, :] * ed.norms[None, :, :])  # (n, n, npts)
    out = K * np.moveaxis(scale, 2, 0)
    if isinstance(A.row_space, BlockModel):
        return out
    return out[:, 0, 0]


def symbol_S(A: OperatorMatrix, z):
    """Diagonal Berezin symbol at one point (scalar or n x n matrix)."""
    res = symbol_S_many(A, np.asarray([hypgeom._as_z(z)]))
    return res[0] if res.ndim > 1 else complex(res[0])


def symbol_Q_many(A: OperatorMatrix, zs=None, ed: EvalData | None = None):
    """Q(A) at many points: K_A(z,z) right-normalised by the block norms."""
    if ed is None:
        ed = eval_data(A.row_space, zs)
    K = _pair_values(A, ed)
    scale = 1.0 / (ed.norms ** 2)  # (n, npts)
    out = K * np.moveaxis(scale, 1, 0)[:, None, :]
    if isinstance(A.row_space, BlockModel):
        return out
    return out[:, 0, 0]


def symbol_Q(A: OperatorMatrix, z):
    res = symbol_Q_many(A, np.asarray([hypgeom._as_z(z)]))
    return res[0] if res.ndim > 1 else complex(res[0])


def symbol_two_point(A: OperatorMatrix, z, w):
    """K_A(z, w) = <A E_w, E_z>; holomorphic in z, anti-holomorphic in w."""
    zc, wc = hypgeom._as_z(z), hypgeom._as_z(w)
    space = A.row_space
    if isinstance(space, BlockModel):
        edz = eval_data(space, [zc])
        edw = eval_data(space, [wc])
        n = space.n_blocks
        K = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                vi = np.conj(edz.blocks[i][:, 0])
                vj = np.conj(edw.blocks[j][:, 0])
                K[i, j] = np.vdot(vi, A.data[space.block_slice(i),
                                             space.block_slice(j)] @ vj)
        return K
    vz = np.conj(space.halfplane_basis_matrix([zc])[:, 0])
    vw = np.conj(space.halfplane_basis_matrix([wc])[:, 0])
    return complex(np.vdot(vz, A.data @ vw))


def symbol_two_point_normalized(A: OperatorMatrix, z, w):
    """The ratio K_A(z,w) / K_I(z,w) (scalar models)."""
    if isinstance(A.row_space, BlockModel):
        raise ValueError("normalised two-point symbol is scalar-model only")
    ident = A.row_space.identity_matrix()
    return symbol_two_point(A, z, w) / symbol_two_point(ident, z, w)


class BerezinSymbol:
    """Callable bundle of the symbols of one operator."""

    def __init__(self, A: OperatorMatrix):
        self.operator = A

    def at(self, z):
        return symbol_S(self.operator, z)

    def q_at(self, z):
        return symbol_Q(self.operator, z)

    def two_point(self, z, w):
        return symbol_two_point(self.operator, z, w)

    def two_point_normalized(self, z, w):
        return symbol_two_point_normalized(self.operator, z, w)


# -- Berezin transform ------------------------------------------------------------

def berezin_transform(f, z, rule: quad.QuadratureRule):
    """B f(z) = (1/c_m) integral f(w) delta(z, w) dmu(w) on a FullDisk rule.

    delta(z, w) = |K(z,w)|^2 y_z^m y_w^m uses the closed-form kernel, so
    B 1 = 1 up to quadrature only; f >= 0 gives B f(z) >= 0 because every
    weight and every delta value is nonnegative.
    """
    if rule.domain != quad.FULL_DISK:
        raise ValueError("berezin_transform requires a FullDisk rule")
    m = rule.m
    model = BergmanModel(m, 1)
    zc = hypgeom._as_z(z)
    ws = rule.nodes
    zh = rule.halfplane_nodes
    fv = _scalar_symbol_values(f, rule)
    kv = model.kernel(zc, zh)
    dens = (np.abs(kv) ** 2) * np.imag(zc) ** m * 4.0 * np.abs(1.0 - ws) ** (-2 * m)
    total = np.dot(rule.weights, fv * dens) / model.kernel_constant
    return complex(total)


def _scalar_symbol_values(f, rule):
    from .modforms import InvariantSymbol
    if isinstance(f, InvariantSymbol):
        return np.asarray(f(rule.halfplane_nodes, reduced_data=rule.reduced()))
    if callable(f):
        return np.asarray(f(rule.halfplane_nodes), dtype=complex)
    vals = np.asarray(f, dtype=complex)
    if vals.shape != rule.nodes.shape:
        raise ValueError("symbol value array does not match the rule's nodes")
    return vals


# -- the invariant trace ----------------------------------------------------------

@dataclass
class TraceResult:
    value: complex
    error_bar: float

    def __complex__(self):
        return complex(self.value)


def _trace_integrand(A: OperatorMatrix, rule):
    ed = eval_data_for_rule(A.row_space, rule)
    K = _pair_values(A, ed)
    diag = np.einsum("pii->pi", K)
    tr = np.mean(diag / np.moveaxis(ed.norms ** 2, 1, 0), axis=1)
    return tr


def trace_tau(A: OperatorMatrix, rule: quad.QuadratureRule,
              with_error: bool = True) -> TraceResult:
    """tau(A) = (1/mu(F)) integral_F tr_n S(A)(z) dmu(z), with an error bar
    from re-integrating on the coarser companion rule."""
    if rule.domain != quad.FUNDAMENTAL:
        raise ValueError("trace_tau requires a FundamentalDomain rule")
    tr = _trace_integrand(A, rule)
    val = complex(np.dot(rule.weights, tr) / rule.total_weight)
    err = float("nan")
    if with_error and rule.level > 1:
        coarse = quad.fundamental_rule(rule.level - 1)
        trc = _trace_integrand(A, coarse)
        err = abs(val - complex(np.dot(coarse.weights, trc) / coarse.total_weight))
    return TraceResult(val, err)


def trace_via_Q(A: OperatorMatrix, f, rule: quad.QuadratureRule):
    """tau(A T_f) = (1/mu(F)) integral_F tr_n(f(z) Q(A)(z)) dmu(z).

    f may be an InvariantSymbol / callable / per-node value array (scalar
    symbols) or a per-node stack of matrices (block symbols).
    """
    if rule.domain != quad.FUNDAMENTAL:
        raise ValueError("trace_via_Q requires a FundamentalDomain rule")
    ed = eval_data_for_rule(A.row_space, rule)
    Q = symbol_Q_many(A, ed=ed)
    if isinstance(A.row_space, BlockModel):
        fv = _matrix_symbol_values(f, rule, A.row_space.n_blocks)
        integrand = np.einsum("pij,pji->p", fv, Q) / A.row_space.n_blocks
    else:
        fv = _scalar_symbol_values(f, rule)
        integrand = fv * Q
    return complex(np.dot(rule.weights, integrand) / rule.total_weight)


def _matrix_symbol_values(f, rule, n):
    vals = f(rule.halfplane_nodes) if callable(f) else np.asarray(f, dtype=complex)
    vals = np.asarray(vals, dtype=complex)
    if vals.shape != (len(rule.weights), n, n):
        raise ValueError(f"matrix symbol values must have shape (npts, {n}, {n})")
    return vals


# -- covariance -------------------------------------------------------------------

def covariance_check(A: OperatorMatrix, g: hypgeom.GroupElement, z) -> float:
    """Residual of S(L(g)^-1 A L(g))(z) against S(A)(g.z).

    Blocks with distinct weights conjugate by the explicit diagonal phase
    D = diag(u^(m_i)) with u = J(g,z)/|J(g,z)|; the residual vanishes as the
    truncation grows.
    """
    zc = hypgeom._as_z(z)
    space = A.row_space
    gz = g.apply(zc)
    if isinstance(space, BlockModel):
        Mg = block_discrete_series(space, g)
        Mginv = block_discrete_series(space, g.inv())
        B = Mginv @ A @ Mg
        u = hypgeom.automorphy_J(g, zc)
        u = u / abs(u)
        D = np.diag([u ** mi for mi in space.weights])
        lhs = D @ symbol_S(B, zc) @ np.conj(D).T
        rhs = symbol_S(A, gz)
        return float(np.linalg.norm(lhs - rhs))
    Mg = space.discrete_series_matrix(g)
    Mginv = space.discrete_series_matrix(g.inv())
    B = Mginv @ A @ Mg
    return float(abs(symbol_S(B, zc) - symbol_S(A, gz)))


def block_discrete_series(block: BlockModel, g: hypgeom.GroupElement) -> OperatorMatrix:
    """Block-diagonal direct sum of the per-weight discrete-series matrices."""
    data = np.zeros((block.dim, block.dim), dtype=complex)
    for i, mod in enumerate(block.blocks):
        s = block.block_slice(i)
        data[s, s] = mod.discrete_series_matrix(g).data
    return OperatorMatrix(data, block, block)


def dump_symbol_field(path, zs, values):
    """CSV dump of a sampled symbol field: x, y, Re, Im columns per entry."""
    zs = np.asarray(zs, dtype=complex)
    vals = np.asarray(values)
    with open(path, "w") as fh:
        if vals.ndim == 1:
            fh.write("x,y,re,im\n")
            for z, v in zip(zs, vals):
                fh.write(f"{z.real!r},{z.imag!r},{v.real!r},{v.imag!r}\n")
        else:
            n = vals.shape[1]
            cols = ",".join(f"re_{i}{j},im_{i}{j}" for i in range(n) for j in range(n))
            fh.write("x,y," + cols + "\n")
            for z, V in zip(zs, vals):
                entries = ",".join(f"{V[i, j].real!r},{V[i, j].imag!r}"
                                   for i in range(n) for j in range(n))
                fh.write(f"{z.real!r},{z.imag!r},{entries}\n")
