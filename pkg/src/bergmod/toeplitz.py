"""Toeplitz operators: scalar, rectangular cusp-form intertwiners and
matrix-valued block operators, plus the identity checks built on them.

Assembly conventions (disk rules, weight tagged by the target space):

* scalar, weight m:   T[j,k] = sum_i w_i f(z_i) e_k(w_i) conj(e_j(w_i));
* intertwiner H_m -> H_{m+p} for a weight-p cusp form f, assembled with the
  weight-(m+p) rule:

      T[j,k] = e^(i pi p/4) c^(m+p)_j c^(m)_k
               sum_i w_i f(z_i) w_i^k conj(w_i)^j (1 - w_i)^(-p),

* its adjoint partner P_m M_{conj(f) y^p} P_{m+p}, assembled with the
  weight-m rule:

      A[j,k] = e^(-i pi p/4) c^(m)_j c^(m+p)_k
               sum_i w_i conj(f(z_i)) w_i^k conj(w_i)^j (1-|w_i|^2)^p (1-conj(w_i))^(-p).

Both formulas come from pushing the half-plane inner products through the
Cayley unitary; the (1 - w)^(-p) growth is cancelled by the cusp bound
|f| <= B y^(-p/2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import berezin, hypgeom, quad
from .bergman import BergmanModel, BlockModel, OperatorMatrix
from .errors import NotCuspidal, NotInLinftyH, WeightMismatch
from .modforms import InvariantSymbol, QExpansion, eval_form_many


def assembly_rule(m: int, level: int, trunc: int, cache_dir=None) -> quad.QuadratureRule:
    """Disk rule sized for exact Gram integrals at the given truncation."""
    return quad.cached_rule(quad.FULL_DISK, level, m=m, min_degree=trunc,
                            cache_dir=cache_dir)


def _symbol_at_rule(f, rule):
    if isinstance(f, InvariantSymbol):
        return np.asarray(f(rule.halfplane_nodes, reduced_data=rule.reduced()))
    if isinstance(f, (int, float, complex)):
        return np.full(len(rule.weights), complex(f))
    if callable(f):
        return np.asarray(f(rule.halfplane_nodes), dtype=complex)
    return np.asarray(f, dtype=complex)


def toeplitz_matrix(f, model: BergmanModel, rule: quad.QuadratureRule) -> OperatorMatrix:
    """T_f = P M_f P for a bounded symbol on a scalar model.

    With a rule of min_degree >= trunc, T_1 = I to machine precision and
    f >= 0 on the nodes gives a positive semidefinite matrix.
    """
    if rule.domain != quad.FULL_DISK or rule.m != model.m:
        raise ValueError("toeplitz_matrix needs a FullDisk rule of the model's weight")
    fv = _symbol_at_rule(f, rule)
    V = model.disk_basis_matrix(rule.nodes)
    return OperatorMatrix(np.conj(V) @ ((rule.weights * fv)[:, None] * V.T),
                          model, model)


def toeplitz_block(f: QExpansion, source: BergmanModel,
                   rule: quad.QuadratureRule) -> OperatorMatrix:
    """The cusp-form intertwiner P_{m+p} M_f P_m : H_m -> H_{m+p}."""
    if not f.cuspidal:
        raise NotCuspidal("the intertwiner needs a cusp form (a_0 = 0)")
    m, p = source.m, f.weight
    target = BergmanModel(m + p, source.trunc)
    if rule.domain != quad.FULL_DISK or rule.m != m + p:
        raise ValueError("toeplitz_block needs a FullDisk rule of weight m + p")
    w = rule.nodes
    fv = eval_form_many(f, rule.halfplane_nodes, reduced_data=rule.reduced())
    ck = source.basis_norms()
    cj = target.basis_norms()
    core = rule.weights * fv * (1.0 - w) ** (-float(p))
    Pk = w[None, :] ** np.arange(source.trunc)[:, None]      # (k, nodes)
    Pj = np.conj(w)[None, :] ** np.arange(target.trunc)[:, None]
    data = np.exp(0.25j * np.pi * p) * (cj[:, None] * (Pj * core[None, :]) @ Pk.T
                                        * ck[None, :]).astype(complex)
    return OperatorMatrix(data, target, source)


def adjoint_assembly(g: QExpansion, source: BergmanModel,
                     rule: quad.QuadratureRule) -> OperatorMatrix:
    """Direct assembly of P_m M_{conj(g) y^p} P_{m+p} : H_{m+p} -> H_m."""
    if not g.cuspidal:
        raise NotCuspidal("the adjoint partner needs a cusp form (a_0 = 0)")
    m, p = source.m, g.weight
    target = BergmanModel(m + p, source.trunc)
    if rule.domain != quad.FULL_DISK or rule.m != m:
        raise ValueError("adjoint_assembly needs a FullDisk rule of weight m")
    w = rule.nodes
    gv = eval_form_many(g, rule.halfplane_nodes, reduced_data=rule.reduced())
    core = (rule.weights * np.conj(gv) * (1.0 - np.abs(w) ** 2) ** float(p)
            * (1.0 - np.conj(w)) ** (-float(p)))
    cj = source.basis_norms()
    ck = target.basis_norms()
    Pk = w[None, :] ** np.arange(target.trunc)[:, None]
    Pj = np.conj(w)[None, :] ** np.arange(source.trunc)[:, None]
    data = np.exp(-0.25j * np.pi * p) * (cj[:, None] * (Pj * core[None, :]) @ Pk.T
                                         * ck[None, :]).astype(complex)
    return OperatorMatrix(data, source, target)


def adjoint_formula_check(g: QExpansion, source: BergmanModel, level: int,
                          cache_dir=None) -> float:
    """Frobenius distance between the conjugate transpose of the assembled
    intertwiner and the directly assembled adjoint partner."""
    m, p = source.m, g.weight
    rule_mp = assembly_rule(m + p, level, source.trunc, cache_dir)
    rule_m = assembly_rule(m, level, source.trunc, cache_dir)
    T = toeplitz_block(g, source, rule_mp)
    Astar = adjoint_assembly(g, source, rule_m)
    return float(np.linalg.norm(T.H.data - Astar.data))


@dataclass
class CompositeResult:
    residual: float
    lhs: OperatorMatrix
    rhs: OperatorMatrix


def composite_identity_check(f: QExpansion, g: QExpansion, source: BergmanModel,
                             level: int, leading: int | None = None,
                             cache_dir=None) -> CompositeResult:
    """Residual of the composite identity (T_g)^* T_f = T_{f conj(g) y^p} on H_m."""
    if f.weight != g.weight:
        raise WeightMismatch(f"cusp forms of weights {f.weight} != {g.weight}")
    m, p = source.m, f.weight
    rule_mp = assembly_rule(m + p, level, source.trunc, cache_dir)
    rule_m = assembly_rule(m, level, source.trunc, cache_dir)
    Tf = toeplitz_block(f, source, rule_mp)
    Tg = toeplitz_block(g, source, rule_mp)
    lhs = Tg.H @ Tf
    sym = InvariantSymbol.from_pair(f, g)
    rhs = toeplitz_matrix(sym, source, rule_m)
    k = leading if leading is not None else source.trunc
    residual = float(np.linalg.norm(lhs.data[:k, :k] - rhs.data[:k, :k]))
    return CompositeResult(residual, lhs, rhs)


# -- matrix symbols ---------------------------------------------------------------

@dataclass
class MatrixSymbol:
    """Matrix-valued symbol over a tuple of block weights.

    entries maps (i, j) to one of
      * a scalar / callable / InvariantSymbol   (requires m_i = m_j),
      * ("form", QExpansion of weight m_i - m_j)       for m_i > m_j,
      * ("cform", QExpansion of weight m_j - m_i)      for m_i < m_j,
    the latter meaning conj(g) y^(m_j - m_i).  Missing entries are zero.
    """

    weights: tuple
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = tuple(int(m) for m in self.weights)
        for (i, j), entry in self.entries.items():
            p = self.weights[i] - self.weights[j]
            if isinstance(entry, tuple):
                kind, form = entry
                if kind == "form":
                    if p <= 0 or form.weight != p:
                        raise WeightMismatch(
                            f"entry ({i},{j}) needs a weight-{p} form")
                    if not form.cuspidal:
                        raise NotCuspidal(f"entry ({i},{j}) must be cuspidal")
                elif kind == "cform":
                    if p >= 0 or form.weight != -p:
                        raise WeightMismatch(
                            f"entry ({i},{j}) needs a conj form of weight {-p}")
                    if not form.cuspidal:
                        raise NotCuspidal(f"entry ({i},{j}) must be cuspidal")
                else:
                    raise ValueError(f"unknown entry kind {kind!r}")
            elif p != 0:
                raise WeightMismatch(
                    f"entry ({i},{j}) has automorphy exponent {p}, needs a form")

    @property
    def n(self):
        return len(self.weights)

    def values(self, zs, reduced_data=None) -> np.ndarray:
        """Entrywise values, shape (npts, n, n)."""
        zs = np.asarray(zs, dtype=complex)
        if reduced_data is None:
            reduced_data = hypgeom.reduce_many(zs)
        out = np.zeros((len(zs), self.n, self.n), dtype=complex)
        y = np.imag(zs)
        for (i, j), entry in self.entries.items():
            p = self.weights[i] - self.weights[j]
            if isinstance(entry, tuple):
                kind, form = entry
                fv = eval_form_many(form, zs, reduced_data=reduced_data)
                out[:, i, j] = fv if kind == "form" else np.conj(fv) * y ** float(-p)
            elif isinstance(entry, InvariantSymbol):
                out[:, i, j] = entry(zs, reduced_data=reduced_data)
            elif callable(entry):
                out[:, i, j] = np.asarray(entry(zs), dtype=complex)
            else:
                out[:, i, j] = complex(entry)
        return out

    def twisted_values(self, zs, reduced_data=None) -> np.ndarray:
        """H_z u(z) H_z^(-1), whose Frobenius norm must be essentially bounded."""
        vals = self.values(zs, reduced_data)
        y = np.imag(np.asarray(zs, dtype=complex))
        expo = 0.5 * (np.asarray(self.weights)[:, None] - np.asarray(self.weights)[None, :])
        return vals * y[:, None, None] ** expo[None, :, :]

    def linf_H_sup(self, n_grid: int = 30) -> float:
        """Reported sup over an F-grid of ||H u H^-1||_F."""
        xs = np.linspace(-0.49, 0.49, n_grid)
        ys = np.geomspace(0.88, 60.0, n_grid)
        zz = (xs[:, None] + 1j * ys[None, :]).ravel()
        zz = zz[np.abs(zz) >= 1.0]
        tv = self.twisted_values(zz)
        return float(np.max(np.linalg.norm(tv, axis=(1, 2))))

    def adjoint_symbol(self) -> "MatrixSymbol":
        """The symbol of the adjoint operator: H^-1 (H^*)^-1 u^* H^* H."""
        new = {}
        for (i, j), entry in self.entries.items():
            if isinstance(entry, tuple):
                kind, form = entry
                new[(j, i)] = ("cform", form) if kind == "form" else ("form", form)
            elif isinstance(entry, InvariantSymbol):
                fn = entry
                new[(j, i)] = InvariantSymbol(
                    lambda zs, reduced_data=None, _f=fn: np.conj(_f(zs, reduced_data)),
                    f"conj of {fn.description}", fn.cusp_vanishing, fn.weight)
            elif callable(entry):
                new[(j, i)] = (lambda zs, _f=entry: np.conj(_f(zs)))
            else:
                new[(j, i)] = np.conj(complex(entry))
        return MatrixSymbol(self.weights, new)


def identity_symbol(weights) -> MatrixSymbol:
    return MatrixSymbol(tuple(weights), {(i, i): 1.0 for i in range(len(weights))})


def matrix_toeplitz(sym: MatrixSymbol, block: BlockModel, level: int,
                    linf_check: bool = False, cache_dir=None) -> OperatorMatrix:
    """Block matrix of T_sym: block (i, j) is P_{m_i} M_{u_ij} P_{m_j}.

    Off-diagonal cusp-form blocks delegate to toeplitz_block /
    adjoint_assembly, so they agree bit for bit with the standalone
    intertwiners assembled on the same rules.
    """
    if tuple(sym.weights) != tuple(block.weights):
        raise WeightMismatch("symbol and block weights differ")
    if linf_check and not np.isfinite(sym.linf_H_sup()):
        raise NotInLinftyH("symbol fails the twisted boundedness check")
    N = block.trunc
    data = np.zeros((block.dim, block.dim), dtype=complex)
    for (i, j), entry in sym.entries.items():
        si, sj = block.block_slice(i), block.block_slice(j)
        mi, mj = block.weights[i], block.weights[j]
        if isinstance(entry, tuple):
            kind, form = entry
            if kind == "form":
                rule = assembly_rule(mi, level, N, cache_dir)
                data[si, sj] = toeplitz_block(form, block.blocks[j], rule).data
            else:
                rule = assembly_rule(mi, level, N, cache_dir)
                data[si, sj] = adjoint_assembly(form, block.blocks[i], rule).data
        else:
            rule = assembly_rule(mi, level, N, cache_dir)
            data[si, sj] = toeplitz_matrix(entry, block.blocks[i], rule).data
    return OperatorMatrix(data, block, block)


# -- the B operator (lifted-symbol form with a Gamma shell sum) --------------------

@dataclass
class BFieldResult:
    values: np.ndarray        # (npts, n, n)
    shell_norms: dict         # height -> max field increment over the grid
    height: int
    norm_ratio: float | None = None


def operator_B_apply(sym, zs, height: int, rule_F: quad.QuadratureRule,
                     max_count: int = 2_000_000) -> BFieldResult:
    """B f sampled on a grid, via the fundamental-domain integral with the
    gamma-shell sum (one representative per +-gamma pair):

        B u(z) = (y_z^m / c_m) integral_F u(w)
                 sum_gamma |K(z, gamma w)|^2 (Im gamma w)^m dmu(w).

    Only equal-weight blocks (or scalar symbols) are supported; there the
    twist conjugation is by scalar phases and B acts entrywise.
    """
    if not isinstance(sym, MatrixSymbol):
        raise TypeError("operator_B_apply takes a MatrixSymbol "
                        "(wrap scalar symbols as a 1x1 block)")
    if len(set(sym.weights)) != 1:
        raise NotInLinftyH("operator_B_apply needs equal block weights")
    m = sym.weights[0]
    n = sym.n
    fvals = sym.values(rule_F.halfplane_nodes, reduced_data=rule_F.reduced())
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    model = BergmanModel(m, 1)
    cm = model.kernel_constant
    w_nodes = rule_F.nodes
    shells = hypgeom.gamma_shells(height, max_count)
    dens = np.zeros((len(zs), len(w_nodes)))
    out = np.zeros((len(zs), n, n), dtype=complex)
    shell_norms = {}
    for h in range(1, height + 1):
        inc = np.zeros_like(dens)
        for g in shells[h]:
            gw = g.apply(w_nodes)
            kv = model.kernel(zs[:, None], gw[None, :])
            inc += (np.abs(kv) ** 2) * np.imag(gw)[None, :] ** m
        dens += inc
        field_inc = np.einsum("pw,w,wij->pij", inc, rule_F.weights, fvals)
        field_inc *= (np.imag(zs) ** m / cm)[:, None, None]
        shell_norms[h] = float(np.max(np.linalg.norm(field_inc, axis=(1, 2))))
    out = np.einsum("pw,w,wij->pij", dens, rule_F.weights, fvals)
    out *= (np.imag(zs) ** m / cm)[:, None, None]
    return BFieldResult(out, shell_norms, height)


def b_field_with_norm_ratio(sym: MatrixSymbol, height: int,
                            rule_F: quad.QuadratureRule) -> BFieldResult:
    """B f on the rule's own nodes plus the L2_H norm ratio ||Bf|| / ||f||."""
    res = operator_B_apply(sym, rule_F.halfplane_nodes, height, rule_F)
    fv = sym.values(rule_F.halfplane_nodes, reduced_data=rule_F.reduced())
    nf = np.sqrt(np.dot(rule_F.weights, np.linalg.norm(fv, axis=(1, 2)) ** 2))
    nb = np.sqrt(np.dot(rule_F.weights, np.linalg.norm(res.values, axis=(1, 2)) ** 2))
    res.norm_ratio = float(nb / nf) if nf > 0 else float("nan")
    return res


# -- T* pairing -----------------------------------------------------------------

@dataclass
class TStarResult:
    max_residual: float
    lhs: np.ndarray
    rhs: np.ndarray


def T_star_check(As, syms, block: BlockModel, rule_F: quad.QuadratureRule,
                 level: int, cache_dir=None) -> TStarResult:
    """Verify <T^*(A), f>_{L2_H} = <A, T_f>_tau with T^*(A) = Q(A)/(n mu(F)).

    Runs over a dictionary of operators A and equal-weight matrix symbols f;
    the left side is the twisted L2 pairing of Q(A)/(n mu(F)) with f, the
    right side is tau(A T_f^*) through the assembled Toeplitz matrix.
    """
    if not block.equal_weights:
        raise NotInLinftyH("the pairing dictionary needs equal block weights")
    n = block.n_blocks
    muF = rule_F.total_weight
    red = rule_F.reduced()
    lhs = np.zeros((len(As), len(syms)), dtype=complex)
    rhs = np.zeros_like(lhs)
    ed = berezin.eval_data_for_rule(block, rule_F)
    Qs = [berezin.symbol_Q_many(A, ed=ed) for A in As]
    for b, f in enumerate(syms):
        fv = f.values(rule_F.halfplane_nodes, reduced_data=red)
        Tf = matrix_toeplitz(f, block, level, cache_dir=cache_dir)
        for a, A in enumerate(As):
            pair = np.einsum("pij,pij->p", Qs[a], np.conj(fv))
            lhs[a, b] = np.dot(rule_F.weights, pair) / (n * muF)
            rhs[a, b] = berezin.trace_tau(A @ Tf.H, rule_F, with_error=False).value
    return TStarResult(float(np.max(np.abs(lhs - rhs))), lhs, rhs)


# -- density experiment -----------------------------------------------------------

@dataclass
class DensityResult:
    sizes: list
    symbol_residuals: list
    operator_residuals: list
    target_symbol_norm: float
    target_operator_norm: float
    rank_deficient: bool
    runtimes: dict = field(default_factory=dict)


def pair_dictionary(weight_list, M: int = 200):
    """All equal-weight cusp-form pair symbols (f_i, g_j)_k, k in weight_list."""
    from .modforms import cusp_basis
    out = []
    for k in weight_list:
        basis = cusp_basis(k, M)
        for f in basis:
            for g in basis:
                out.append(InvariantSymbol.from_pair(f, g))
    return out


def density_experiment(weight_list, target: InvariantSymbol, model: BergmanModel,
                       rule_F: quad.QuadratureRule, level: int, M: int = 200,
                       cache_dir=None) -> DensityResult:
    """Least-squares distance of a cusp-vanishing target from the growing
    dictionary span, both in L2(F, dmu) and in the tau 2-norm.

    The tau pairing of truncated operators factors exactly through the
    feature map Phi(T)[:, i] = sqrt(w_i)/(n(z_i) sqrt(mu F)) T v_{z_i}, so
    both projections are plain least-squares problems and the residual
    ladders are non-increasing by construction.
    """
    t0 = time.time()
    red = rule_F.reduced()
    zs = rule_F.halfplane_nodes
    sqw = np.sqrt(rule_F.weights)
    rule_disk = assembly_rule(model.m, level, model.trunc, cache_dir)
    ed = berezin.eval_data_for_rule(model, rule_F)
    V = ed.blocks[0]
    norms = ed.norms[0]
    feat_scale = sqw / (norms * np.sqrt(rule_F.total_weight))

    def sym_vec(s):
        return sqw * np.asarray(s(zs, reduced_data=red))

    def op_feat(Tmat):
        return ((Tmat.data @ np.conj(V)) * feat_scale[None, :]).ravel()

    tvec = sym_vec(target)
    T_target = toeplitz_matrix(target, model, rule_disk)
    tfeat = op_feat(T_target)
    sym_cols, op_cols = [], []
    # rung 0: the empty dictionary, residual = target norm
    sizes = [0]
    sym_res = [float(np.linalg.norm(tvec))]
    op_res = [float(np.linalg.norm(tfeat))]
    deficient = False
    for k in weight_list:
        for s in pair_dictionary([k], M):
            sym_cols.append(sym_vec(s))
            op_cols.append(op_feat(toeplitz_matrix(s, model, rule_disk)))
        sizes.append(len(sym_cols))
        A = np.stack(sym_cols, axis=1)
        B = np.stack(op_cols, axis=1)
        cs, *_ = np.linalg.lstsq(A, tvec, rcond=None)
        co, *_ = np.linalg.lstsq(B, tfeat, rcond=None)
        if np.linalg.matrix_rank(A, tol=1e-12) < A.shape[1]:
            deficient = True
        sym_res.append(float(np.linalg.norm(tvec - A @ cs)))
        op_res.append(float(np.linalg.norm(tfeat - B @ co)))
    return DensityResult(
        sizes, sym_res, op_res,
        float(np.linalg.norm(tvec)), float(np.linalg.norm(tfeat)),
        deficient, {"seconds": time.time() - t0})


# -- ladders and props used by checks ----------------------------------------------

def intertwining_residual(f: QExpansion, m: int, N: int, gamma: hypgeom.GroupElement,
                          level: int, leading: int = 20, cache_dir=None) -> float:
    """|| T_f L_m(gamma) - L_{m+p}(gamma) T_f ||_F on the leading block."""
    source = BergmanModel(m, N)
    target = BergmanModel(m + f.weight, N)
    rule = assembly_rule(m + f.weight, level, N, cache_dir)
    Tf = toeplitz_block(f, source, rule)
    Lm = source.discrete_series_matrix(gamma)
    Lmp = target.discrete_series_matrix(gamma)
    R = Tf.data @ Lm.data - Lmp.data @ Tf.data
    return float(np.linalg.norm(R[:leading, :leading]))


def gamma_commutation_residual(f: InvariantSymbol, m: int, N: int,
                               gamma: hypgeom.GroupElement, level: int,
                               leading: int = 20, cache_dir=None) -> float:
    """|| T_f L_m(gamma) - L_m(gamma) T_f ||_F on the leading block."""
    model = BergmanModel(m, N)
    rule = assembly_rule(m, level, N, cache_dir)
    Tf = toeplitz_matrix(f, model, rule)
    L = model.discrete_series_matrix(gamma)
    R = Tf.data @ L.data - L.data @ Tf.data
    return float(np.linalg.norm(R[:leading, :leading]))


def kadison_step_min_eig(block: BlockModel, sym: MatrixSymbol, z, level: int,
                         cache_dir=None) -> float:
    """Minimum eigenvalue of phi_z(f f*) - phi_z(f) phi_z(f)* with
    phi_z(f) = S(T_f)(z); nonnegative up to roundoff because phi_z is a
    unital completely positive map when the assembly rule is polynomially
    exact."""
    if not block.equal_weights:
        raise NotInLinftyH("the Kadison step needs equal block weights")
    Tf = matrix_toeplitz(sym, block, level, cache_dir=cache_dir)
    n = sym.n

    def prod_symbol(zs, reduced_data=None):
        vals = sym.values(zs, reduced_data=reduced_data)
        return np.einsum("pij,pkj->pik", vals, np.conj(vals))

    rule = assembly_rule(block.weights[0], level, block.trunc, cache_dir)
    fv = prod_symbol(rule.halfplane_nodes, reduced_data=rule.reduced())
    data = np.zeros((block.dim, block.dim), dtype=complex)
    V = block.blocks[0].disk_basis_matrix(rule.nodes)
    for i in range(n):
        for j in range(n):
            data[block.block_slice(i), block.block_slice(j)] = (
                np.conj(V) @ ((rule.weights * fv[:, i, j])[:, None] * V.T))
    Tff = OperatorMatrix(data, block, block)
    phi_f = berezin.symbol_S(Tf, z)
    phi_ff = berezin.symbol_S(Tff, z)
    gap = phi_ff - phi_f @ np.conj(phi_f).T
    return float(np.min(np.linalg.eigvalsh(0.5 * (gap + np.conj(gap).T))))
