"""Truncated orthonormal models of the weighted Bergman spaces.

The canonical basis lives on the unit disk: e_n(w) = c_n w^n with
c_n = sqrt(Gamma(n+m) / (pi n! Gamma(m-1))), orthonormal for the measure
(1-|w|^2)^(m-2) dA.  Half-plane objects are transported by the weight-m
Cayley unitary

    (U F)(z) = 2^((m-2)/2) F(phi(z)) phi'(z)^(m/2),   phi(z) = (z-i)/(z+i),

with phi'(z)^(m/2) fixed as (2i)^(m/2) (z+i)^(-m) (principal branch of the
constant, integer power of the variable part), which keeps the factor
continuous on the half-plane and makes the transported kernel come out as
K_m(z, w) = c_m ((z - conj(w))/(2i))^(-m) with c_m = (m-1)/(4 pi).

The group acts on the disk through Cayley conjugation into SU(1,1):
h = (a b; c d) maps to (alpha beta; conj(beta) conj(alpha)) with
alpha = ((a+d) + i(b-c))/2 and beta = ((a-d) - i(b+c))/2, and

    (D_m(g) F)(w) = (conj(beta) w + conj(alpha))^(-m) F((alpha w + beta) /
                    (conj(beta) w + conj(alpha))),  (alpha, beta) from g^(-1),

which is an exact group homomorphism (the only error in the finite matrices
is the truncation of the basis).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import hypgeom
from .errors import SeriesDivergence


@dataclass(frozen=True)
class BergmanModel:
    """Weight-m Bergman space truncated to polynomial degree < N (disk basis)."""

    m: int
    trunc: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("weight must be >= 2")
        if self.trunc < 1:
            raise ValueError("truncation must be >= 1")

    @property
    def kernel_constant(self) -> float:
        """Half-plane diagonal constant: K(z,z) = c_m y^(-m), c_m = (m-1)/(4 pi)."""
        return (self.m - 1) / (4.0 * np.pi)

    @property
    def dim(self) -> int:
        return self.trunc

    def basis_norms(self) -> np.ndarray:
        n = np.arange(self.trunc)
        return np.exp(0.5 * (gammaln(n + self.m) - gammaln(n + 1)
                             - gammaln(self.m - 1) - np.log(np.pi)))

    def basis_eval(self, n: int, w) -> complex:
        """e_n(w) = c_n w^n on the disk."""
        if not 0 <= n < self.trunc:
            raise ValueError(f"basis index {n} outside [0, {self.trunc})")
        c = self.basis_norms()[n]
        return c * np.asarray(w, dtype=complex) ** n

    def disk_basis_matrix(self, ws) -> np.ndarray:
        """Matrix V[n, i] = e_n(w_i) for disk points w_i."""
        ws = np.asarray(ws, dtype=complex)
        c = self.basis_norms()
        powers = ws[None, :] ** np.arange(self.trunc)[:, None]
        return c[:, None] * powers

    def halfplane_basis_matrix(self, zs) -> np.ndarray:
        """Matrix U[n, i] = u_n(z_i) of the transported basis on the half-plane.

        u_n(z) = (1/2) exp(-i pi m / 4) c_n w^n (1 - w)^m with w = phi(z).
        """
        zs = np.asarray(zs, dtype=complex)
        w = hypgeom.cayley(zs)
        pref = 0.5 * np.exp(-0.25j * np.pi * self.m) * (1.0 - w) ** self.m
        return self.disk_basis_matrix(w) * pref[None, :]

    def kernel(self, z, w):
        """Closed-form half-plane kernel c_m ((z - conj(w)) / 2i)^(-m)."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        return self.kernel_constant * ((z - np.conj(w)) / 2j) ** (-self.m)

    def kernel_disk(self, u, v):
        """Disk kernel (m-1)/pi (1 - u conj(v))^(-m)."""
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        return (self.m - 1) / np.pi * (1.0 - u * np.conj(v)) ** (-self.m)

    def evaluation_vector(self, z) -> "EvaluationVector":
        """Coefficients of E_z(1): coeffs[n] = conj(u_n(z)), so that
        sum coeffs[n] f_n = f(z) for truncated f (pairing convention
        <f, E_z> = f(z))."""
        zc = hypgeom._as_z(z)
        u = self.halfplane_basis_matrix(np.asarray([zc]))[:, 0]
        return EvaluationVector(zc, np.conj(u))

    def discrete_series_matrix(self, g: hypgeom.GroupElement) -> "OperatorMatrix":
        """Truncated matrix of L_m(g): f -> J(g^-1, z)^(-m) f(g^-1 . z).

        Columns are the exact basis coefficients of the image functions,
        computed by binomial series in the disk coordinate; the truncated
        matrix is exactly the compression P_N L_m(g) P_N.
        """
        h = g.inv()
        alpha, beta = hypgeom.su11(h)
        return OperatorMatrix(_dsm_entries(self, alpha, beta), self, self)

    def identity_matrix(self) -> "OperatorMatrix":
        return OperatorMatrix(np.eye(self.trunc, dtype=complex), self, self)


def _dsm_entries(model: BergmanModel, alpha: complex, beta: complex) -> np.ndarray:
    N, m = model.trunc, model.m
    if abs(beta) >= abs(alpha) * (1.0 - 1e-12):
        raise SeriesDivergence("Mobius image of the expansion disk touches the boundary")
    ac, bc = np.conj(alpha), np.conj(beta)
    ratio = bc / ac
    c = model.basis_norms()
    M = np.zeros((N, N), dtype=complex)
    ks = np.arange(N)
    for n in range(N):
        # coefficients of (beta + alpha w)^n (ac + bc w)^(-(n+m))
        s = n + m
        # binomial series of (1 + ratio w)^(-s), scaled by ac^(-s)
        series = np.empty(N, dtype=complex)
        series[0] = ac ** (-float(s))
        for k in range(1, N):
            series[k] = series[k - 1] * (-(s + k - 1.0) / k) * ratio
        if n == 0:
            col = series
        elif beta == 0:
            col = np.roll(series, n) * alpha ** n
            col[:n] = 0.0
        else:
            binom = np.zeros(n + 1, dtype=complex)
            binom[0] = beta ** n
            step = alpha / beta
            for j in range(1, n + 1):
                binom[j] = binom[j - 1] * ((n - j + 1.0) / j) * step
            col = np.convolve(binom, series)[:N]
        M[:, n] = col * (c[n] / c[ks])
    return M


@dataclass
class EvaluationVector:
    point: complex
    coeffs: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class BlockModel:
    """Direct sum of weight-m_i models with the diagonal twist H_z.

    H_z = diag(y^(m_i / 2)), so H_z* H_z = diag(y^(m_i)) exactly.
    """

    weights: tuple
    trunc: int
    blocks: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(m) for m in self.weights))
        object.__setattr__(
            self, "blocks", tuple(BergmanModel(m, self.trunc) for m in self.weights))

    @property
    def n_blocks(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.n_blocks * self.trunc

    @property
    def equal_weights(self) -> bool:
        return len(set(self.weights)) == 1

    def block_slice(self, i: int) -> slice:
        return slice(i * self.trunc, (i + 1) * self.trunc)

    def block_twist(self, z) -> np.ndarray:
        """H_z = diag(y^(m_i/2)), the positive square root of diag(y^(m_i))."""
        y = float(np.imag(hypgeom._as_z(z)))
        if y <= 0:
            raise ValueError("twist requires a point of the upper half-plane")
        return np.diag([y ** (mi / 2.0) for mi in self.weights])

    def identity_matrix(self) -> "OperatorMatrix":
        return OperatorMatrix(np.eye(self.dim, dtype=complex), self, self)


def block_twist(block: BlockModel, z) -> np.ndarray:
    return block.block_twist(z)


@dataclass
class OperatorMatrix:
    """Finite matrix of a truncated operator, tagged with its spaces.

    row_space / col_space are BergmanModel or BlockModel instances; mixed
    weight compositions type-check at multiplication time.
    """

    data: np.ndarray
    row_space: object
    col_space: object

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("operator entries must be finite")
        if self.data.shape != (self.row_space.dim, self.col_space.dim):
            raise ValueError(
                f"shape {self.data.shape} does not match spaces "
                f"({self.row_space.dim}, {self.col_space.dim})")

    @property
    def H(self) -> "OperatorMatrix":
        """Adjoint: conjugate transpose (bases are orthonormal)."""
        return OperatorMatrix(self.data.conj().T, self.col_space, self.row_space)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.col_space is not other.row_space and self.col_space != other.row_space:
            raise ValueError("operator composition: spaces do not match")
        return OperatorMatrix(self.data @ other.data, self.row_space, other.col_space)

    def __add__(self, other):
        return OperatorMatrix(self.data + other.data, self.row_space, self.col_space)

    def __sub__(self, other):
        return OperatorMatrix(self.data - other.data, self.row_space, self.col_space)

    def __mul__(self, scalar):
        return OperatorMatrix(self.data * scalar, self.row_space, self.col_space)

    __rmul__ = __mul__

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.data, 2))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.data))

    def leading_block(self, k: int) -> np.ndarray:
        return self.data[:k, :k]

    def to_json(self) -> str:
        flat = self.data.ravel()
        return json.dumps({
            "format": "opmatrix_v1",
            "shape": list(self.data.shape),
            "entries": [[float(v.real), float(v.imag)] for v in flat],
        })

    @classmethod
    def from_json(cls, text: str, row_space, col_space) -> "OperatorMatrix":
        d = json.loads(text)
        if d.get("format") != "opmatrix_v1":
            raise ValueError(f"unsupported matrix format {d.get('format')!r}")
        rows, cols = d["shape"]
        arr = np.array([complex(re, im) for re, im in d["entries"]],
                       dtype=complex).reshape(rows, cols)
        return cls(arr, row_space, col_space)
