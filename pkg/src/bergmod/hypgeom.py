"""Hyperbolic plane, the modular group and its cocycle.

Conventions fixed here and inherited by every other module:

* a matrix g = (a b; c d) acts directly on the upper half-plane by
  g.z = (a z + b) / (c z + d);
* the automorphy cocycle is J(g, z) = c z + d, so that
  J(g h, z) = J(g, h z) J(h, z);
* the Jacobian of z -> g.z is J_D(g, z) = J(g, z)^(-2);
* the standard fundamental domain is F = {|Re z| <= 1/2, |z| >= 1},
  with boundary representatives normalised to Re z <= 0.

Group elements of SL(2,Z) are stored with exact Python integers, so the
group law carries no rounding error at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityExceeded, IterationLimit

_DET_TOL = 1e-12
_REAL_KINDS = ("f", "i")


@dataclass(frozen=True)
class GroupElement:
    """An element of SL(2,R); entries are exact ints for SL(2,Z)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if self.is_integral:
            if det != 1:
                raise ValueError(f"determinant must be exactly 1, got {det}")
        elif abs(det - 1.0) > _DET_TOL:
            raise ValueError(f"determinant must be 1 within {_DET_TOL}, got {det}")

    @property
    def is_integral(self) -> bool:
        return all(isinstance(v, int) for v in (self.a, self.b, self.c, self.d))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inv(self) -> "GroupElement":
        # adjugate formula; exact for integer entries
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.a, -self.b, -self.c, -self.d)

    def height(self):
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def apply(self, z):
        """Mobius action g.z = (az+b)/(cz+d), valid for scalars or arrays."""
        return (self.a * z + self.b) / (self.c * z + self.d)

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def __repr__(self):
        return f"GroupElement({self.a}, {self.b}, {self.c}, {self.d})"


IDENTITY = GroupElement(1, 0, 0, 1)
S = GroupElement(0, -1, 1, 0)
T = GroupElement(1, 1, 0, 1)


def translation(n: int) -> GroupElement:
    return GroupElement(1, n, 0, 1)


@dataclass(frozen=True)
class HPoint:
    """Point x + iy of the upper half-plane."""

    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValueError(f"HPoint requires y > 0, got y = {self.y}")

    @classmethod
    def from_complex(cls, z) -> "HPoint":
        return cls(float(np.real(z)), float(np.imag(z)))

    @property
    def as_complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class DPoint:
    """Point of the open unit disk (Cayley image of an HPoint)."""

    re: float
    im: float

    def __post_init__(self):
        if not self.re * self.re + self.im * self.im < 1.0:
            raise ValueError("DPoint requires |w| < 1")

    @classmethod
    def from_complex(cls, w) -> "DPoint":
        return cls(float(np.real(w)), float(np.imag(w)))

    @property
    def as_complex(self) -> complex:
        return complex(self.re, self.im)


def cayley(z):
    """Half-plane to disk: w = (z - i)/(z + i)."""
    return (z - 1j) / (z + 1j)


def cayley_inv(w):
    """Disk to half-plane: z = i (1 + w)/(1 - w)."""
    return 1j * (1 + w) / (1 - w)


def _as_z(z):
    if isinstance(z, HPoint):
        return z.as_complex
    return z


def mobius_apply(g: GroupElement, z):
    """Apply g to z; the image has Im = y / |cz+d|^2."""
    return g.apply(_as_z(z))


def automorphy_J(g: GroupElement, z):
    """Cocycle J(g, z) = c z + d."""
    return g.c * _as_z(z) + g.d


def jacobian_JD(g: GroupElement, z):
    """Complex derivative of z -> g.z, equal to J(g, z)^(-2)."""
    return automorphy_J(g, z) ** (-2)


@dataclass
class ReductionResult:
    zstar: complex
    gamma: GroupElement
    word: list = field(default_factory=list)


def reduce_to_fundamental(z, max_iter: int = 200) -> ReductionResult:
    """Move z into the closed fundamental domain, recording gamma with gamma.z = z*.

    Ties on the boundary walls resolve to the representative with Re z* <= 0.
    Raises IterationLimit when the loop does not settle (only possible for
    inputs squeezed against the real axis).
    """
    z = _as_z(z)
    if not np.imag(z) > 0:
        raise ValueError("reduction requires a point of the upper half-plane")
    gamma = IDENTITY
    word: list = []
    x, y = float(np.real(z)), float(np.imag(z))
    for _ in range(max_iter):
        n = round(x)
        if n != 0:
            x -= n
            gamma = translation(-n) @ gamma
            word.append(("T", -n))
        r2 = x * x + y * y
        if r2 < 1.0 - 1e-15:
            x, y = -x / r2, y / r2
            gamma = S @ gamma
            word.append(("S", 1))
            continue
        break
    else:
        raise IterationLimit(f"reduction of {z} did not finish in {max_iter} steps")
    # canonical representative on the two walls
    if x >= 0.5 - 1e-14:
        x -= 1.0
        gamma = translation(-1) @ gamma
        word.append(("T", -1))
    if abs(x * x + y * y - 1.0) <= 1e-14 and x > 1e-14:
        r2 = x * x + y * y
        x, y = -x / r2, y / r2
        gamma = S @ gamma
        word.append(("S", 1))
    return ReductionResult(complex(x, y), gamma, word)


def in_fundamental_domain(z, tol: float = 1e-12) -> bool:
    z = _as_z(z)
    return abs(np.real(z)) <= 0.5 + tol and abs(z) >= 1.0 - tol


def reduce_many(zs, max_iter: int = 200):
    """Vectorised reduction of an array of points.

    Returns (zstar, a, b, c, d) with integer arrays so that
    (a z + b)/(c z + d) = zstar elementwise.
    """
    zs = np.asarray(zs, dtype=complex)
    x = np.real(zs).copy()
    y = np.imag(zs).copy()
    if np.any(y <= 0):
        raise ValueError("all points must lie in the upper half-plane")
    a = np.ones(zs.shape, dtype=np.int64)
    b = np.zeros(zs.shape, dtype=np.int64)
    c = np.zeros(zs.shape, dtype=np.int64)
    d = np.ones(zs.shape, dtype=np.int64)
    for _ in range(max_iter):
        n = np.rint(x).astype(np.int64)
        moved = n != 0
        if moved.any():
            x -= n
            a -= n * c
            b -= n * d
        r2 = x * x + y * y
        inv = r2 < 1.0 - 1e-15
        if not inv.any():
            break
        xi, yi, ri = x[inv], y[inv], r2[inv]
        x[inv] = -xi / ri
        y[inv] = yi / ri
        a[inv], b[inv], c[inv], d[inv] = -c[inv], -d[inv], a[inv], b[inv]
    else:
        bad = np.nonzero(x * x + y * y < 1.0 - 1e-15)[0]
        raise IterationLimit(f"reduction stalled at indices {bad[:8]}")
    wall = x >= 0.5 - 1e-14
    x[wall] -= 1.0
    a[wall] -= c[wall]
    b[wall] -= d[wall]
    arc = (np.abs(x * x + y * y - 1.0) <= 1e-14) & (x > 1e-14)
    if arc.any():
        r2 = x[arc] ** 2 + y[arc] ** 2
        xa, ya = x[arc], y[arc]
        x[arc] = -xa / r2
        y[arc] = ya / r2
        a[arc], b[arc], c[arc], d[arc] = -c[arc], -d[arc], a[arc], b[arc]
    return x + 1j * y, a, b, c, d


def enumerate_gamma(height: int, max_count: int = 2_000_000):
    """All gamma in SL(2,Z) with max(|a|,|b|,|c|,|d|) <= height.

    Deterministic lexicographic order on (c, d, a, b).  For each coprime
    (c, d) the solutions of a d - b c = 1 form the line (a0 + t c, b0 + t d).
    """
    if height < 1:
        raise ValueError("height must be >= 1")
    out = []
    h = int(height)
    for c in range(-h, h + 1):
        for d in range(-h, h + 1):
            if c == 0 and d == 0:
                continue
            if math.gcd(c, d) != 1:
                continue
            # particular solution of a*d - b*c = 1
            g, u, v = _ext_gcd(d, -c)
            a0, b0 = u, v
            sols = []
            if c == 0 and d != 0:
                # a = 1/d exact: d = +-1, a fixed, b free
                aa = a0
                if abs(aa) <= h:
                    sols = [(aa, bb) for bb in range(-h, h + 1)]
            elif d == 0:
                bb = b0
                if abs(bb) <= h:
                    sols = [(aa, bb) for aa in range(-h, h + 1)]
            else:
                lo, hi = _t_range(a0, c, h)
                lo2, hi2 = _t_range(b0, d, h)
                lo, hi = max(lo, lo2), min(hi, hi2)
                sols = [(a0 + t * c, b0 + t * d) for t in range(lo, hi + 1)]
            for aa, bb in sorted(sols):
                out.append(GroupElement(aa, bb, c, d))
                if len(out) > max_count:
                    raise CapacityExceeded(
                        f"enumerate_gamma(height={height}) exceeds {max_count} elements"
                    )
    return out


def _ext_gcd(p, q):
    if q == 0:
        return (p, 1, 0) if p >= 0 else (-p, -1, 0)
    g, u, v = _ext_gcd(q, p % q)
    return g, v, u - (p // q) * v


def _t_range(x0, step, h):
    """Integer t with |x0 + t*step| <= h (step != 0)."""
    lo = (-h - x0) / step
    hi = (h - x0) / step
    if lo > hi:
        lo, hi = hi, lo
    return math.ceil(lo - 1e-12), math.floor(hi + 1e-12)


def psl_representatives(gammas):
    """One representative of each {gamma, -gamma} pair: c > 0, or c = 0 and d > 0."""
    return [g for g in gammas if g.c > 0 or (g.c == 0 and g.d > 0)]


def su11(g: GroupElement):
    """Cayley conjugate of g: the SU(1,1) matrix (alpha beta; conj beta conj alpha)
    acting directly on the disk by w -> (alpha w + beta)/(conj(beta) w + conj(alpha))."""
    a, b, c, d = (float(v) for v in g.as_tuple())
    alpha = complex((a + d) / 2.0, (b - c) / 2.0)
    beta = complex((a - d) / 2.0, -(b + c) / 2.0)
    return alpha, beta


def jacobian_disk(g: GroupElement, w):
    """Jacobian of the disk action at w: (conj(beta) w + conj(alpha))^(-2).

    This is the bounded-domain counterpart of jacobian_JD; its modulus decays
    like height(g)^(-2) along the group, which is what makes Poincare series
    absolutely convergent."""
    alpha, beta = su11(g)
    return (np.conj(beta) * w + np.conj(alpha)) ** (-2)


def gamma_shells(height: int, max_count: int = 2_000_000):
    """PSL representatives grouped by exact height 1..height."""
    shells = {h: [] for h in range(1, height + 1)}
    for g in psl_representatives(enumerate_gamma(height, max_count)):
        shells[g.height()].append(g)
    return shells
