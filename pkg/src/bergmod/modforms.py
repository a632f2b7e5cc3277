"""Cusp forms for SL(2,Z) as truncated q-expansions.

Series arithmetic is carried out with exact Python integers, so identities
like the weight-12 discriminant relation hold coefficientwise with no
rounding.  Evaluation anywhere on the upper half-plane goes through
fundamental-domain reduction: at a reduced point |q| <= exp(-pi sqrt(3)),
and the value is pulled back with the automorphy factor

    f(z) = J(gamma, z)^(-k) f(z*),   gamma.z = z*,

which is the classical transformation law f(g.z) = (cz+d)^k f(z).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import hypgeom, quad
from .errors import (EmptySpace, NotCuspidal, RankDeficientWarning, TailTooLarge,
                     WeightMismatch)

Q_CUTOFF = np.exp(-np.pi * np.sqrt(3.0))  # largest |q| after reduction


@dataclass
class QExpansion:
    """Truncated Fourier expansion sum_{n<=M} a_n q^n of a weight-k form."""

    weight: int
    coeffs: list

    def __post_init__(self):
        if self.weight % 2 != 0 or self.weight < 4:
            raise ValueError("only even weights >= 4 are admitted")
        self.coeffs = list(self.coeffs)
        self._float = None

    @property
    def M(self) -> int:
        return len(self.coeffs) - 1

    @property
    def cuspidal(self) -> bool:
        return self.coeffs[0] == 0

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, int) for c in self.coeffs)

    def coeffs_float(self) -> np.ndarray:
        if self._float is None:
            self._float = np.asarray(self.coeffs, dtype=complex)
        return self._float

    def __add__(self, other):
        _check_weights(self, other)
        return QExpansion(self.weight, _pad_add(self.coeffs, other.coeffs))

    def __sub__(self, other):
        _check_weights(self, other)
        return QExpansion(self.weight, _pad_add(self.coeffs, [-c for c in other.coeffs]))

    def __mul__(self, other):
        if isinstance(other, QExpansion):
            M = min(self.M, other.M)
            return QExpansion(self.weight + other.weight,
                              qmul(self.coeffs, other.coeffs, M))
        return QExpansion(self.weight, [c * other for c in self.coeffs])

    __rmul__ = __mul__

    def scale(self, s):
        return QExpansion(self.weight, [c * s for c in self.coeffs])

    def to_json_dict(self):
        exact = self.is_exact
        return {
            "format": "qexpansion_v1",
            "weight": self.weight,
            "M": self.M,
            "exact": exact,
            "coeffs": self.coeffs if exact
                      else [[float(np.real(c)), float(np.imag(c))] for c in self.coeffs],
        }

    @classmethod
    def from_json_dict(cls, d):
        if d.get("format") != "qexpansion_v1":
            raise ValueError(f"unsupported expansion format {d.get('format')!r}")
        coeffs = (d["coeffs"] if d["exact"]
                  else [complex(re, im) for re, im in d["coeffs"]])
        return cls(d["weight"], coeffs)


def _check_weights(f, g):
    if f.weight != g.weight:
        raise WeightMismatch(f"weights {f.weight} and {g.weight} differ")


def _pad_add(a, b):
    n = max(len(a), len(b))
    out = [0] * n
    for i, c in enumerate(a):
        out[i] = out[i] + c
    for i, c in enumerate(b):
        out[i] = out[i] + c
    return out


def qmul(a, b, M):
    """Truncated Cauchy product of coefficient lists, exact for ints."""
    out = [0] * (M + 1)
    for i, ai in enumerate(a[: M + 1]):
        if ai == 0:
            continue
        top = min(len(b) - 1, M - i)
        for j in range(top + 1):
            bj = b[j]
            if bj != 0:
                out[i + j] += ai * bj
    return out


def qpow(a, e, M):
    out = [1] + [0] * M
    base = list(a[: M + 1])
    while e > 0:
        if e & 1:
            out = qmul(out, base, M)
        base = qmul(base, base, M)
        e >>= 1
    return out


_BERNOULLI = {4: Fraction(-1, 30), 6: Fraction(1, 42)}


def sigma(n: int, k: int) -> int:
    """Divisor power sum, by brute force."""
    return sum(d ** k for d in range(1, n + 1) if n % d == 0)


@lru_cache(maxsize=None)
def eisenstein_qexp(k: int, M: int) -> QExpansion:
    """E_k = 1 - (2k/B_k) sum sigma_{k-1}(n) q^n for k in {4, 6}; exact integers.

    Cached: callers share the returned object and must not mutate it.
    """
    if k not in _BERNOULLI:
        raise ValueError("only the generator weights 4 and 6 are provided")
    if M < 1:
        raise ValueError("M must be >= 1")
    factor = Fraction(-2 * k, 1) / _BERNOULLI[k]
    assert factor.denominator == 1
    c = int(factor)
    coeffs = [1] + [c * sigma(n, k - 1) for n in range(1, M + 1)]
    return QExpansion(k, coeffs)


@lru_cache(maxsize=None)
def delta_qexp(M: int) -> QExpansion:
    """The discriminant form q prod (1 - q^n)^24, truncated at q^M."""
    if M < 1:
        raise ValueError("M must be >= 1")
    # Euler product of (1 - q^n) truncated at q^(M-1), then the 24th power
    prod = [1] + [0] * (M - 1)
    for n in range(1, M):
        new = list(prod)
        for i in range(M - n):
            if prod[i]:
                new[i + n] -= prod[i]
        prod = new
    p24 = qpow(prod, 24, M - 1)
    return QExpansion(12, [0] + p24)


def _dim_modular(k: int) -> int:
    if k % 2 or k < 0:
        return 0
    return k // 12 if k % 12 == 2 else k // 12 + 1


def dim_cusp_forms(k: int) -> int:
    """dim S_k = dim M_k - 1 for even k >= 4 (E_k spans the complement)."""
    if k % 2 or k < 4:
        return 0
    return max(_dim_modular(k) - 1, 0)


@lru_cache(maxsize=None)
def cusp_basis(k: int, M: int) -> tuple:
    """Echelonised basis of the weight-k cusp space, Delta times E4^a E6^b."""
    if k % 2 or k < 12:
        raise EmptySpace(f"no cusp forms of weight {k}")
    e4 = eisenstein_qexp(4, M)
    e6 = eisenstein_qexp(6, M)
    delta = delta_qexp(M)
    monomials = []
    r = k - 12
    for a in range(r // 4 + 1):
        rem = r - 4 * a
        if rem % 6 == 0:
            monomials.append((a, rem // 6))
    forms = []
    for a, b in monomials:
        f = QExpansion(12, list(delta.coeffs))
        coeffs = f.coeffs
        if a:
            coeffs = qmul(coeffs, qpow(e4.coeffs, a, M), M)
        if b:
            coeffs = qmul(coeffs, qpow(e6.coeffs, b, M), M)
        forms.append(QExpansion(k, coeffs))
    basis = _echelonise(forms, M)
    expected = dim_cusp_forms(k)
    if len(basis) != expected:
        raise AssertionError(
            f"basis size {len(basis)} disagrees with the dimension formula {expected}")
    return tuple(basis)


def _echelonise(forms, M):
    """Fraction-exact reduced row echelon on the leading coefficients, so the
    basis has a_j = delta_ij for pivots at q, q^2, ... (Miller-style)."""
    rows = [[Fraction(c) for c in f.coeffs] for f in forms]
    weight = forms[0].weight if forms else 0
    basis = []
    pivots = []
    pivot = 1
    while rows and pivot <= M:
        rows.sort(key=lambda r: (r[pivot] == 0,))
        if rows[0][pivot] == 0:
            pivot += 1
            continue
        lead = rows.pop(0)
        inv = 1 / lead[pivot]
        lead = [c * inv for c in lead]
        rows = [[rc - r[pivot] * lc for rc, lc in zip(r, lead)] for r in rows]
        rows = [r for r in rows if any(c != 0 for c in r)]
        basis.append(lead)
        pivots.append(pivot)
        pivot += 1
    # back-substitution: clear every pivot column above its row
    for i in range(len(basis) - 1, -1, -1):
        p = pivots[i]
        for j in range(i):
            factor = basis[j][p]
            if factor != 0:
                basis[j] = [a - factor * b for a, b in zip(basis[j], basis[i])]
    out = []
    for row in basis:
        ints = all(c.denominator == 1 for c in row)
        out.append(QExpansion(weight, [int(c) if ints else float(c) for c in row]))
    return out


# -- evaluation ---------------------------------------------------------------

def _series_at(f: QExpansion, zstar):
    q = np.exp(2j * np.pi * np.asarray(zstar))
    coeffs = f.coeffs_float()
    # Horner in q, constant term last
    acc = np.zeros_like(q)
    for c in coeffs[::-1]:
        acc = acc * q + c
    return acc


def tail_bound(f: QExpansion, qabs: float) -> float:
    """Crude bound on |sum_{n>M} a_n q^n| from the empirical growth |a_n| <= C n^k.

    C is fitted from the computed coefficients; the geometric ratio uses
    r = |q| exp(k/(M+1)) which dominates (1+1/n)^k |q| for n > M.
    """
    k, M = f.weight, f.M
    ns = np.arange(1, M + 1)
    av = np.abs(f.coeffs_float()[1:])
    if not av.any():
        return 0.0
    C = float(np.max(av / ns ** float(k)))
    r = qabs * math.exp(k / (M + 1.0))
    if r >= 1.0:
        return float("inf")
    return C * (M + 1.0) ** k * qabs ** (M + 1) / (1.0 - r)


def eval_form(f: QExpansion, z, tail_tol: float = 1e-10):
    """Evaluate a weight-k expansion at any point of the upper half-plane."""
    return complex(eval_form_many(f, np.asarray([hypgeom._as_z(z)]), tail_tol)[0])


def eval_form_many(f: QExpansion, zs, tail_tol: float = 1e-10,
                   reduced_data=None) -> np.ndarray:
    """Vectorised evaluation via reduce-then-sum with automorphy pullback.

    reduced_data may carry precomputed (zstar, a, b, c, d) for the given
    points (quadrature rules cache this).
    """
    zs = np.asarray(zs, dtype=complex)
    if reduced_data is None:
        reduced_data = hypgeom.reduce_many(zs)
    zstar, _, _, c, d = reduced_data
    tb = tail_bound(f, float(np.exp(-2.0 * np.pi * np.min(np.imag(zstar)))))
    if tb > tail_tol:
        raise TailTooLarge(f"q-series tail bound {tb:.3e} exceeds {tail_tol:.1e}; "
                           f"increase the expansion depth M")
    vals = _series_at(f, zstar)
    J = c * zs + d
    return vals * J ** (-float(f.weight))


def petersson(f: QExpansion, g: QExpansion, rule: quad.QuadratureRule):
    """Normalised Petersson product (1/mu(F)) integral_F f conj(g) y^k dmu."""
    _check_weights(f, g)
    if rule.domain != quad.FUNDAMENTAL:
        raise ValueError("petersson requires a FundamentalDomain rule")
    red = rule.reduced()
    zs = rule.nodes
    fv = eval_form_many(f, zs, reduced_data=red)
    gv = eval_form_many(g, zs, reduced_data=red)
    yk = np.imag(zs) ** float(f.weight)
    return complex(np.dot(rule.weights, fv * np.conj(gv) * yk) / rule.total_weight)


# -- Gamma-invariant symbols --------------------------------------------------

class InvariantSymbol:
    """A bounded Gamma-invariant function on the upper half-plane.

    Built either from a pair of equal-weight forms, z -> f(z) conj(g(z)) y^k
    (these vanish at the cusp), or from a user closure that is evaluated at
    the reduced representative so invariance holds by construction.
    """

    def __init__(self, fn, description="", cusp_vanishing=None, weight=None):
        self._fn = fn
        self.description = description
        self.cusp_vanishing = cusp_vanishing
        self.weight = weight

    @classmethod
    def from_pair(cls, f: QExpansion, g: QExpansion):
        _check_weights(f, g)
        k = f.weight
        if not (f.cuspidal and g.cuspidal):
            raise NotCuspidal("pair symbols require cusp forms")

        def fn(zs, reduced_data=None):
            zs = np.asarray(zs, dtype=complex)
            if reduced_data is None:
                reduced_data = hypgeom.reduce_many(zs)
            zstar = reduced_data[0]
            fv = _series_at(f, zstar)
            gv = _series_at(g, zstar)
            return fv * np.conj(gv) * np.imag(zstar) ** float(k)

        return cls(fn, f"pair symbol of weight {k}", cusp_vanishing=True, weight=k)

    @classmethod
    def from_function(cls, h, description="", cusp_vanishing=None):
        """Wrap a function of the reduced point z* (invariance by construction)."""

        def fn(zs, reduced_data=None):
            zs = np.asarray(zs, dtype=complex)
            if reduced_data is None:
                reduced_data = hypgeom.reduce_many(zs)
            return np.asarray(h(reduced_data[0]), dtype=complex)

        return cls(fn, description, cusp_vanishing=cusp_vanishing)

    @classmethod
    def constant(cls, value):
        return cls(lambda zs, reduced_data=None: np.full(np.shape(zs), value, dtype=complex),
                   f"constant {value}", cusp_vanishing=(value == 0))

    def __call__(self, zs, reduced_data=None):
        return self._fn(np.atleast_1d(np.asarray(zs, dtype=complex)), reduced_data)

    def sup_on_grid(self, n: int = 40) -> float:
        """Reported sup over a dense grid of F (essential-boundedness check)."""
        xs = np.linspace(-0.5, 0.5, n)
        ys = np.geomspace(0.87, 40.0, n)
        zz = (xs[:, None] + 1j * ys[None, :]).ravel()
        zz = zz[np.abs(zz) >= 1.0]
        return float(np.max(np.abs(self(zz))))


def random_invariant_symbol(rng, weights=(12, 16, 18), M: int = 200) -> InvariantSymbol:
    """Random complex combination of cusp-form pair symbols (the canonical
    Gamma-invariant class); bounded, real-analytic and cusp-vanishing.

    Kept at the natural scale of the integer-normalised basis forms (pair
    symbols of weight 12 peak around 1e-6), matching the magnitudes the
    trace identities are quoted at.
    """
    parts = []
    for k in weights:
        basis = cusp_basis(k, M)
        for f in basis:
            for g in basis:
                parts.append(InvariantSymbol.from_pair(f, g))
    coeffs = rng.standard_normal(len(parts)) + 1j * rng.standard_normal(len(parts))

    def fn(zs, reduced_data=None):
        zs = np.asarray(zs, dtype=complex)
        if reduced_data is None:
            reduced_data = hypgeom.reduce_many(zs)
        acc = np.zeros(zs.shape, dtype=complex)
        for c, s in zip(coeffs, parts):
            acc += c * s(zs, reduced_data=reduced_data)
        return acc

    return InvariantSymbol(
        fn, f"random pair combination over weights {tuple(weights)}",
        cusp_vanishing=True)


def bump_symbol(center=2j, width: float = 0.7) -> InvariantSymbol:
    """Smooth Gamma-invariant bump exp(-d_hyp(z*, center)^2 / width^2)."""
    yc = float(np.imag(center))

    def h(zstar):
        y = np.imag(zstar)
        d = np.arccosh(1.0 + np.abs(zstar - center) ** 2 / (2.0 * y * yc))
        return np.exp(-(d / width) ** 2)

    return InvariantSymbol.from_function(h, f"bump at {center}", cusp_vanishing=True)


# -- Poincare series ----------------------------------------------------------
#
# The series lives on the bounded domain: P_{m,f}(w) = sum_gamma
# J_D(gamma, w)^m f(gamma.w) with J_D the disk Jacobian (hypgeom.jacobian_disk),
# whose modulus decays like height(gamma)^(-2); the half-plane cocycle
# (cz+d)^(-2) would leave the translation shells undamped.  Points are taken
# in half-plane coordinates and converted; only one representative per
# {gamma, -gamma} pair is summed (both act identically).

@dataclass
class PoincareResult:
    value: complex
    shell_sums: dict
    abs_shell_sums: dict
    tail_diagnostic: float
    height: int


def _poincare_terms(m, poly_coeffs, zs, gammas):
    """Sum of J_D(gamma, w)^m poly(gamma.w) in disk coordinates."""
    ws = hypgeom.cayley(np.asarray(zs, dtype=complex))
    p = np.asarray(poly_coeffs, dtype=complex)
    total = np.zeros(ws.shape, dtype=complex)
    for g in gammas:
        alpha, beta = hypgeom.su11(g)
        den = np.conj(beta) * ws + np.conj(alpha)
        gw = (alpha * ws + beta) / den
        total += den ** (-2 * m) * np.polynomial.polynomial.polyval(gw, p)
    return total


def _poincare_abs(m, poly_coeffs, z, gammas) -> float:
    w = hypgeom.cayley(hypgeom._as_z(z))
    p = np.asarray(poly_coeffs, dtype=complex)
    tot = 0.0
    for g in gammas:
        alpha, beta = hypgeom.su11(g)
        den = np.conj(beta) * w + np.conj(alpha)
        gw = (alpha * w + beta) / den
        tot += abs(den ** (-2 * m) * np.polynomial.polynomial.polyval(gw, p))
    return tot


def poincare_series(m: int, poly_coeffs, z, height: int,
                    max_count: int = 2_000_000) -> PoincareResult:
    """Partial Poincare sum over matrices up to the given height, with the
    contributions grouped by height shell; the tail diagnostic is the
    absolute (term-by-term) contribution of the outermost shell."""
    if m < 4:
        raise ValueError("m must be >= 4 for absolute convergence margin")
    shells = hypgeom.gamma_shells(height, max_count)
    z = hypgeom._as_z(z)
    total = 0.0 + 0.0j
    shell_sums = {}
    abs_sums = {}
    for h in range(1, height + 1):
        shell_sums[h] = complex(_poincare_terms(m, poly_coeffs, [z], shells[h])[0])
        abs_sums[h] = _poincare_abs(m, poly_coeffs, z, shells[h])
        total += shell_sums[h]
    return PoincareResult(total, shell_sums, abs_sums, float(abs_sums[height]), height)


def poincare_bounded_proxy(m: int, poly_coeffs, zs, height: int) -> np.ndarray:
    """|P(w)| / (1-|w|^2)^m, the quantity the theory asserts is bounded."""
    zs = np.asarray(zs, dtype=complex)
    gammas = hypgeom.psl_representatives(hypgeom.enumerate_gamma(height))
    P = _poincare_terms(m, poly_coeffs, zs, gammas)
    w = hypgeom.cayley(zs)
    return np.abs(P) / (1.0 - np.abs(w) ** 2) ** m


def poincare_automorphy_check(m: int, poly_coeffs, z, gamma, height: int):
    """Residual |P_h(z) - J_D(gamma, z)^m P_h(gamma.z)| with a rigorous bound.

    The two partial sums run over index sets equal up to right translation
    by gamma, so the residual is bounded by the absolute sum of the terms
    whose height membership differs; both sets are enumerated exactly.
    """
    z = hypgeom._as_z(z)
    big = 2 * height * max(int(gamma.height()), 1) + 2
    all_g = hypgeom.psl_representatives(hypgeom.enumerate_gamma(big))
    in_h = [g for g in all_g if g.height() <= height]
    lhs = complex(_poincare_terms(m, poly_coeffs, [z], in_h)[0])
    gz = gamma.apply(z)
    rhs_sum = complex(_poincare_terms(m, poly_coeffs, [gz], in_h)[0])
    Jm = hypgeom.jacobian_disk(gamma, hypgeom.cayley(z)) ** m
    residual = abs(lhs - Jm * rhs_sum)
    rhs_translated = set()
    for g in in_h:
        gg = g @ gamma
        gg = gg if (gg.c > 0 or (gg.c == 0 and gg.d > 0)) else -gg
        rhs_translated.add(gg.as_tuple())
    lhs_set = {g.as_tuple() for g in in_h}
    diff = [hypgeom.GroupElement(*t) for t in lhs_set.symmetric_difference(rhs_translated)]
    bound = _poincare_abs(m, poly_coeffs, z, diff)
    return residual, bound


@dataclass
class SeparationResult:
    poly_coeffs: np.ndarray
    achieved: np.ndarray
    residual: float
    rank_deficient: bool


def _check_inequivalent(zs):
    reduced = [hypgeom.reduce_to_fundamental(z).zstar for z in zs]
    for i in range(len(zs)):
        for j in range(i + 1, len(zs)):
            if abs(reduced[i] - reduced[j]) < 1e-8:
                raise ValueError(f"points {i} and {j} are Gamma-equivalent")


def separation_check(points, targets, m: int, height: int,
                     degree: int | None = None) -> SeparationResult:
    """Solve the linear system P_{m, f}(z_i) = target_i for a disk polynomial f.

    Points must be Gamma-inequivalent (verified through reduction).  Least
    squares over the monomial dictionary; a numerically singular evaluation
    matrix is reported, not fatal (retry with larger m).
    """
    zs = [hypgeom._as_z(z) for z in points]
    _check_inequivalent(zs)
    targets = np.asarray(targets, dtype=complex)
    if degree is None:
        degree = len(zs) + 2
    gammas = hypgeom.psl_representatives(hypgeom.enumerate_gamma(height))
    E = np.zeros((len(zs), degree), dtype=complex)
    for j in range(degree):
        mono = np.zeros(j + 1)
        mono[j] = 1.0
        E[:, j] = _poincare_terms(m, mono, zs, gammas)
    rank = np.linalg.matrix_rank(E, tol=1e-10)
    deficient = rank < min(E.shape)
    if deficient:
        warnings.warn("separation system numerically singular; retry with larger m",
                      RankDeficientWarning)
    coeffs, *_ = np.linalg.lstsq(E, targets, rcond=None)
    achieved = E @ coeffs
    residual = float(np.linalg.norm(achieved - targets))
    return SeparationResult(coeffs, achieved, residual, deficient)


def separation_ladder(points, targets, ms, height: int, u_cut: float = 0.5):
    """Residuals |P_{m,f}(z_i) - target_i| for the interpolation polynomial f.

    f is chosen once per m by the convergence argument behind the separation
    property: it interpolates the targets at the points themselves and is
    pinned to zero on every orbit point gamma.z_i whose disk Jacobian
    modulus exceeds u_cut^2.  The leftover sum is then O(u_cut^(2m)), so the
    residual ladder decreases in m.
    """
    zs = [hypgeom._as_z(z) for z in points]
    _check_inequivalent(zs)
    targets = np.asarray(targets, dtype=complex)
    gammas = hypgeom.psl_representatives(hypgeom.enumerate_gamma(height))
    ws = hypgeom.cayley(np.asarray(zs))
    # orbit points where the Jacobian is not yet small
    nodes = list(ws)
    values = list(targets)
    for z in zs:
        w = hypgeom.cayley(z)
        for g in gammas:
            alpha, beta = hypgeom.su11(g)
            den = np.conj(beta) * w + np.conj(alpha)
            if abs(den) ** (-2) > u_cut ** 2:
                gw = (alpha * w + beta) / den
                if all(abs(gw - q) > 1e-9 for q in nodes):
                    nodes.append(gw)
                    values.append(0.0)
    V = np.vander(np.asarray(nodes), len(nodes), increasing=True)
    coeffs = np.linalg.solve(V, np.asarray(values))
    residuals = []
    for m in ms:
        P = _poincare_terms(m, coeffs, zs, gammas)
        residuals.append(float(np.linalg.norm(P - targets)))
    return residuals, coeffs


# -- file format ----------------------------------------------------------------

def save_qexpansion(f: QExpansion, path):
    import json
    with open(path, "w") as fh:
        json.dump(f.to_json_dict(), fh, sort_keys=True)


def load_qexpansion(path) -> QExpansion:
    import json
    with open(path) as fh:
        return QExpansion.from_json_dict(json.load(fh))
