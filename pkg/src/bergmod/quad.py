"""Quadrature against the hyperbolic measure and weighted disk measures.

Two rule families:

* fundamental_rule(level): integrates g against dmu = y^-2 dx dy over the
  modular fundamental domain F.  The cusp is removed by the substitution
  u = 1/y, under which  integral_F g dmu = int_{-1/2}^{1/2} int_0^{umax(x)}
  g(x + i/u) du dx  with umax(x) = 1/sqrt(1-x^2); both directions use
  Gauss-Legendre nodes, so every node lies strictly inside F.

* weighted_disk_rule(m, level): integrates g against (1-|w|^2)^(m-2) dA over
  the unit disk, with Gauss-Jacobi nodes in t = r^2 and equispaced angles.

Rules are cached to disk as versioned JSON triples (x, y, w); regeneration is
bit-identical because node generation is seedless and deterministic.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import hypgeom
from .errors import IntegrationError

FUNDAMENTAL = "FundamentalDomain"
FULL_DISK = "FullDisk"
HALF_PLANE_STRIP = "HalfPlaneStrip"  # reserved tag, no constructor in scope

_NODES_PER_LEVEL = 12


@dataclass
class QuadratureRule:
    domain: str
    level: int
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    m: int | None = None
    min_degree: int = 0
    error_estimate: float = float("nan")
    _reduced: tuple | None = field(default=None, repr=False)

    @property
    def nodes(self):
        """Half-plane nodes for FundamentalDomain rules, disk nodes for FullDisk."""
        return self.x + 1j * self.y

    @property
    def halfplane_nodes(self):
        if self.domain == FUNDAMENTAL:
            return self.nodes
        return hypgeom.cayley_inv(self.nodes)

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    def reduced(self):
        """Per-node fundamental-domain data (zstar, a, b, c, d), computed once.

        For FundamentalDomain rules the nodes are already reduced.
        """
        if self._reduced is None:
            zh = self.halfplane_nodes
            if self.domain == FUNDAMENTAL:
                n = len(zh)
                ints = np.zeros(n, dtype=np.int64)
                ones = np.ones(n, dtype=np.int64)
                self._reduced = (zh, ones, ints, ints, ones)
            else:
                self._reduced = hypgeom.reduce_many(zh)
        return self._reduced

    def to_json(self) -> str:
        payload = {
            "format": "quadrule_v1",
            "domain": self.domain,
            "level": self.level,
            "m": self.m,
            "min_degree": self.min_degree,
            "error_estimate": self.error_estimate,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "w": self.weights.tolist(),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "QuadratureRule":
        d = json.loads(text)
        if d.get("format") != "quadrule_v1":
            raise ValueError(f"unsupported rule format {d.get('format')!r}")
        return cls(
            domain=d["domain"],
            level=d["level"],
            x=np.asarray(d["x"]),
            y=np.asarray(d["y"]),
            weights=np.asarray(d["w"]),
            m=d["m"],
            min_degree=d["min_degree"],
            error_estimate=d["error_estimate"],
        )


def _fundamental_nodes(level: int):
    n = _NODES_PER_LEVEL * level
    tx, wx = roots_legendre(n)
    tu, wu = roots_legendre(n)
    xs = 0.5 * tx  # [-1/2, 1/2]
    wxs = 0.5 * wx
    umax = 1.0 / np.sqrt(1.0 - xs * xs)
    # tensor: u scaled to (0, umax(x)] per column
    u = 0.5 * (tu[:, None] + 1.0) * umax[None, :]
    wu2 = 0.5 * wu[:, None] * umax[None, :]
    w = (wu2 * wxs[None, :]).ravel()
    x = np.broadcast_to(xs[None, :], u.shape).ravel()
    y = (1.0 / u).ravel()
    return x.copy(), y, w


def fundamental_rule(level: int) -> QuadratureRule:
    """Tensor rule for integral_F g dmu; Sum w_i approximates mu(F) = pi/3."""
    if level < 1:
        raise ValueError("level must be >= 1")
    x, y, w = _fundamental_nodes(level)
    rule = QuadratureRule(FUNDAMENTAL, level, x, y, w)
    rule.error_estimate = _refinement_estimate(rule, _fundamental_probe(level))
    return rule


def _fundamental_probe(level):
    if level == 1:
        return None
    x, y, w = _fundamental_nodes(level - 1)
    return QuadratureRule(FUNDAMENTAL, level - 1, x, y, w)


def _reference_integrand(z):
    # smooth bump centred at 2i, in terms of hyperbolic distance
    y = np.imag(z)
    d2 = np.arccosh(1.0 + (np.abs(z - 2j) ** 2) / (2.0 * y * 2.0)) ** 2
    return np.exp(-d2)


def _refinement_estimate(rule, coarse):
    if coarse is None:
        return float("nan")
    a = integrate(rule, _reference_integrand)
    b = integrate(coarse, _reference_integrand)
    return float(abs(a - b))


def _disk_nodes(m: int, level: int, min_degree: int):
    n_r = max(_NODES_PER_LEVEL * level + 4, min_degree + 12)
    n_t = 2 * n_r + 1
    # radial: t = r^2 on [0,1] with weight (1-t)^(m-2)
    xj, wj = roots_jacobi(n_r, m - 2, 0.0)
    t = 0.5 * (xj + 1.0)
    wt = wj / 2.0 ** (m - 1)
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    r = np.sqrt(t)
    w = np.pi * np.repeat(wt, n_t) / n_t
    ww = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    return np.real(ww), np.imag(ww), w


def weighted_disk_rule(m: int, level: int, min_degree: int = 0) -> QuadratureRule:
    """Polar Gauss-Jacobi rule for integral_D g(w) (1-|w|^2)^(m-2) dA.

    Sum of weights equals pi/(m-1) up to roundoff.  min_degree guarantees
    exactness for polynomial integrands w^j conj(w)^k with j, k < min_degree.
    """
    if m < 2:
        raise ValueError("weight m must be >= 2")
    if level < 1:
        raise ValueError("level must be >= 1")
    x, y, w = _disk_nodes(m, level, min_degree)
    rule = QuadratureRule(FULL_DISK, level, x, y, w, m=m, min_degree=min_degree)
    if level > 1:
        xc, yc, wc = _disk_nodes(m, level - 1, min_degree)
        coarse = QuadratureRule(FULL_DISK, level - 1, xc, yc, wc, m=m, min_degree=min_degree)
        zs = hypgeom.cayley_inv
        rule.error_estimate = float(
            abs(
                integrate(rule, lambda v: _reference_integrand(zs(v)))
                - integrate(coarse, lambda v: _reference_integrand(zs(v)))
            )
        )
    return rule


def integrate(rule: QuadratureRule, g):
    """Weighted sum of g over the nodes; matrix integrands go entrywise.

    g may be vectorised (called once on the node array) or scalar-valued;
    evaluation failures are re-raised with the offending node index attached.
    """
    nodes = rule.nodes
    try:
        vals = g(nodes)
        vals = np.asarray(vals)
        if vals.shape == nodes.shape:
            return complex(np.dot(rule.weights, vals))
        if vals.ndim >= 2 and vals.shape[0] == len(nodes):
            return np.tensordot(rule.weights, vals, axes=(0, 0))
    except IntegrationError:
        raise
    except Exception:
        pass
    # scalar fallback locates the failing node
    acc = None
    for i, z in enumerate(nodes):
        try:
            v = g(z)
        except Exception as exc:
            raise IntegrationError(i, str(exc)) from exc
        term = rule.weights[i] * np.asarray(v)
        acc = term if acc is None else acc + term
    if acc is None:
        raise ValueError("rule has no nodes")
    return complex(acc) if np.ndim(acc) == 0 else acc


def mu_F(rule: QuadratureRule) -> float:
    """The rule's own estimate of mu(F) (exactly pi/3 in the limit)."""
    if rule.domain != FUNDAMENTAL:
        raise ValueError("mu_F needs a FundamentalDomain rule")
    return rule.total_weight


def monte_carlo_mu_F(n_samples: int, seed: int = 0):
    """Rejection-sampling estimate of mu(F) with its standard error.

    Samples (x, u) uniformly on [-1/2,1/2] x [0, 2/sqrt(3)] and accepts
    u <= 1/sqrt(1-x^2); the accepted fraction times the box area is mu(F).
    """
    rng = np.random.default_rng(seed)
    box = 2.0 / np.sqrt(3.0)
    xs = rng.uniform(-0.5, 0.5, n_samples)
    us = rng.uniform(0.0, box, n_samples)
    acc = us <= 1.0 / np.sqrt(1.0 - xs * xs)
    p = float(np.mean(acc))
    est = p * box
    se = box * float(np.sqrt(max(p * (1 - p), 1e-12) / n_samples))
    return est, se


def monte_carlo_fundamental(g, n_samples: int, seed: int = 0):
    """Monte-Carlo estimate of integral_F g dmu with standard error."""
    rng = np.random.default_rng(seed)
    box = 2.0 / np.sqrt(3.0)
    xs = rng.uniform(-0.5, 0.5, n_samples)
    us = rng.uniform(0.0, box, n_samples)
    acc = us <= 1.0 / np.sqrt(1.0 - xs * xs)
    zs = xs[acc] + 1j / us[acc]
    vals = np.asarray(g(zs))
    est = box * float(np.sum(np.real(vals))) / n_samples
    se = box * float(np.std(np.real(vals))) * np.sqrt(np.mean(acc) / n_samples)
    return est, se


# -- disk cache ---------------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get("BERGMOD_CACHE")
    if env:
        return Path(env)
    return Path(".bergmod_cache")


def _cache_key(domain, level, m, min_degree):
    tag = "fd" if domain == FUNDAMENTAL else f"disk_m{m}"
    return f"{tag}_level{level}_deg{min_degree}.json"


def cached_rule(domain: str, level: int, m: int | None = None, min_degree: int = 0,
                cache_dir=None) -> QuadratureRule:
    """Load a rule from the cache directory, generating and storing it if absent."""
    cdir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cdir / _cache_key(domain, level, m, min_degree)
    if path.exists():
        return QuadratureRule.from_json(path.read_text())
    rule = (fundamental_rule(level) if domain == FUNDAMENTAL
            else weighted_disk_rule(m, level, min_degree))
    cdir.mkdir(parents=True, exist_ok=True)
    path.write_text(rule.to_json())
    return rule
