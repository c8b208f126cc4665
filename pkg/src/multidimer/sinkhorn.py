"""Critical gauge functions: Sinkhorn iteration and the closed forms.

The critical gauge equations ask for positive f (whites) and g (blacks) with
sum_{e at v} w_e f(u) g(v) = beta_v at every vertex, beta_v = N_v/interior_N.
One Sinkhorn sweep rescales all f's to satisfy the white equations exactly,
then all g's for the black equations.  The pair (f, g) is defined up to
(Cf, g/C); the stored representative pins g = 1 at the lexicographically
smallest black vertex (REFERENCE_VERTEX_ONE) unless asked otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

from .lattice import (RegionGraph, build_aztec_cuboid, build_aztec_diamond,
                      build_truncated_orthant3, build_truncated_quadrant)
from .matching import _as_edge_weights, check_feasible

REFERENCE_VERTEX_ONE = "reference_vertex_one"
GEOMETRIC_MEAN_ONE = "geometric_mean_one"

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10 ** 6


class SinkhornError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class GaugePair:
    """Positive gauge values per white (f) and black (g) vertex."""

    region: RegionGraph
    f: tuple
    g: tuple
    normalization: str = REFERENCE_VERTEX_ONE

    def __post_init__(self):
        if len(self.f) != self.region.n_white or len(self.g) != self.region.n_black:
            raise ValueError("gauge length mismatch with region")
        if any(v <= 0 for v in self.f) or any(v <= 0 for v in self.g):
            raise ValueError("gauge values must be strictly positive")

    def f_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.f])

    def g_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.g])

    def rescaled(self, C) -> "GaugePair":
        """The gauge-equivalent pair (C f, g / C)."""
        return GaugePair(self.region, tuple(v * C for v in self.f),
                         tuple(v / C for v in self.g), self.normalization)

    def is_exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.f + self.g)


@dataclass(frozen=True)
class GaugeDiagnostics:
    iterations: int
    max_residual: float
    residual_history: tuple


def _normalize(region, f, g, normalization):
    if normalization == REFERENCE_VERTEX_ONE:
        i0 = min(range(region.n_black), key=lambda i: region.black_coords[i])
        c = g[i0]
    elif normalization == GEOMETRIC_MEAN_ONE:
        c = np.exp(np.mean(np.log(g)))
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return f * c, g / c


def sinkhorn_solve(region: RegionGraph, weights=None, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER,
                   normalization: str = REFERENCE_VERTEX_ONE,
                   check_feasibility: bool = True):
    """Solve the critical gauge equations by alternating rescaling.

    Returns (GaugePair, GaugeDiagnostics); raises SinkhornError carrying the
    diagnostics if max_iter sweeps do not reach the tolerance.  Edge
    feasibility is a precondition (not re-verified: it needs one max-flow per
    edge); plain feasibility is checked unless disabled.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if check_feasibility:
        res = check_feasible(region)
        if not res["feasible"]:
            raise ValueError(f"region is infeasible ({res['reason']}); "
                             "the gauge equations have no positive solution")
    w_e = np.array([float(x) for x in _as_edge_weights(region, weights)])
    if np.any(w_e <= 0):
        raise ValueError("edge weights must be positive")
    ew, eb = region.edge_white, region.edge_black
    beta_w, beta_b = region.beta_white, region.beta_black
    nw, nb = region.n_white, region.n_black
    f = np.ones(nw)
    g = np.ones(nb)
    history = []
    for it in range(1, max_iter + 1):
        f = beta_w / np.bincount(ew, weights=w_e * g[eb], minlength=nw)
        g = beta_b / np.bincount(eb, weights=w_e * f[ew], minlength=nb)
        c = w_e * f[ew] * g[eb]
        res_w = np.abs(np.bincount(ew, weights=c, minlength=nw) - beta_w).max()
        res_b = np.abs(np.bincount(eb, weights=c, minlength=nb) - beta_b).max()
        residual = max(res_w, res_b)
        history.append(residual)
        if residual <= tol:
            f, g = _normalize(region, f, g, normalization)
            gauge = GaugePair(region, tuple(f), tuple(g), normalization)
            return gauge, GaugeDiagnostics(it, residual, tuple(history))
    diag = GaugeDiagnostics(max_iter, history[-1], tuple(history))
    raise SinkhornError(
        f"no convergence to {tol:g} after {max_iter} sweeps "
        f"(residual {history[-1]:.3e}); is the region edge-feasible?", diag)


def gauge_residual(region: RegionGraph, weights, gauge: GaugePair):
    """Max over vertices of |sum_e w_e f g - beta_v|.

    Exact (Fraction) when the gauge and weights are exact; float otherwise.
    """
    w = _as_edge_weights(region, weights)
    exact = gauge.is_exact() and all(isinstance(x, Fraction) for x in w)
    if exact:
        sw = [Fraction(0)] * region.n_white
        sb = [Fraction(0)] * region.n_black
        for (wi, bi, _t), we in zip(region.edges, w):
            c = we * gauge.f[wi] * gauge.g[bi]
            sw[wi] += c
            sb[bi] += c
        res = Fraction(0)
        for wi in range(region.n_white):
            res = max(res, abs(sw[wi] - Fraction(region.white_N[wi], region.interior_N)))
        for bi in range(region.n_black):
            res = max(res, abs(sb[bi] - Fraction(region.black_N[bi], region.interior_N)))
        return res
    w_e = np.array([float(x) for x in w])
    f, g = gauge.f_array(), gauge.g_array()
    c = w_e * f[region.edge_white] * g[region.edge_black]
    rw = np.abs(np.bincount(region.edge_white, weights=c, minlength=region.n_white)
                - region.beta_white).max()
    rb = np.abs(np.bincount(region.edge_black, weights=c, minlength=region.n_black)
                - region.beta_black).max()
    return float(max(rw, rb))


def critical_edge_weights(region: RegionGraph, weights, gauge: GaugePair):
    """c_e = w_e f(u) g(v), as a DiscreteFlow (invariant under the C-freedom)."""
    from .flows import DiscreteFlow
    w = _as_edge_weights(region, weights)
    if gauge.is_exact() and all(isinstance(x, Fraction) for x in w):
        omega = tuple(we * gauge.f[wi] * gauge.g[bi]
                      for (wi, bi, _t), we in zip(region.edges, w))
    else:
        w_e = np.array([float(x) for x in w])
        omega = tuple((w_e * gauge.f_array()[region.edge_white]
                       * gauge.g_array()[region.edge_black]).tolist())
    return DiscreteFlow(region=region, omega=omega)


def gauge_distance(g1: GaugePair, g2: GaugePair) -> float:
    """min over C>0 of the max entrywise |log| gauge mismatch.

    The objective max(sup|log(C f1/f2)|, sup|log(g1/(C g2))|) is piecewise
    linear in t = log C; the minimum sits at a crossing of the four extreme
    lines, so it is found exactly from the candidate crossings.
    """
    if g1.region.n_white != g2.region.n_white or g1.region.n_black != g2.region.n_black:
        raise ValueError("gauge pairs live on different regions")
    a = np.log(g1.f_array()) - np.log(g2.f_array())
    b = np.log(g1.g_array()) - np.log(g2.g_array())
    amax, amin = float(a.max()), float(a.min())
    bmax, bmin = float(b.max()), float(b.min())

    def value(t):
        return max(amax + t, -(amin + t), bmax - t, -(bmin - t))

    cands = [-(amax + amin) / 2, (bmax + bmin) / 2,
             (bmax - amax) / 2, (bmin - amin) / 2,
             -(amin + bmin) / 2, (amax - bmax) / 2]
    return min(value(t) for t in cands)


def scaled_log_gauge(region: RegionGraph, gauge: GaugePair, scale: int | None = None):
    """(1/n) log g at blacks and -(1/n) log f at whites, on coordinates/n.

    Uses lattice-index coordinates divided by the region scale; returns a list
    of (position ndarray, value) pairs, blacks first.
    """
    n = region.scale if scale is None else scale
    out = []
    for i in range(region.n_black):
        x = np.array([float(c) for c in region.black_coords[i]]) / n
        out.append((x, float(np.log(float(gauge.g[i]))) / n))
    for i in range(region.n_white):
        x = np.array([float(c) for c in region.white_coords[i]]) / n
        out.append((x, -float(np.log(float(gauge.f[i]))) / n))
    return out


# ---------------------------------------------------------------------------
# Closed-form gauges
# ---------------------------------------------------------------------------

def aztec_diamond_gauge(n: int):
    """AD(n): f = n/(n+1) C(n-1,i)/C(n,j), g = C(n-1,j)/C(n,i), exact."""
    region = build_aztec_diamond(n)
    f = tuple(Fraction(n, n + 1) * Fraction(comb(n - 1, i), comb(n, j))
              for (i, j) in region.white_coords)
    g = tuple(Fraction(comb(n - 1, j), comb(n, i))
              for (i, j) in region.black_coords)
    return region, GaugePair(region, f, g)


def aztec_cuboid_gauge(a: int, b: int, c: int):
    """AC(a,b,c): g = C(a,i)/(C(b,j)C(c,k)),
    f = bc/((b+1)(c+1)) C(b-1,j)C(c-1,k)/C(a+1,i+1), exact."""
    region = build_aztec_cuboid(a, b, c)
    f = tuple(Fraction(b * c, (b + 1) * (c + 1))
              * Fraction(comb(b - 1, j) * comb(c - 1, k), comb(a + 1, i + 1))
              for (i, j, k) in region.white_coords)
    g = tuple(Fraction(comb(a, i), comb(b, j) * comb(c, k))
              for (i, j, k) in region.black_coords)
    return region, GaugePair(region, f, g)


def truncated_quadrant_gauge(K: int, depth: int):
    """Polya-corners gauge: w = C(l,j)(l+1-K)!/K^l, b = K^l/(C(l,j)(l+1)(l-K)!)."""
    region = build_truncated_quadrant(K, depth)
    f = tuple(Fraction(comb(i + j, j) * factorial(i + j + 1 - K), K ** (i + j))
              for (i, j) in region.white_coords)
    g = tuple(Fraction(K ** (i + j), comb(i + j, j) * (i + j + 1) * factorial(i + j - K))
              for (i, j) in region.black_coords)
    return region, GaugePair(region, f, g)


def _trinomial(l: int, i: int, j: int) -> int:
    return factorial(l) // (factorial(i) * factorial(j) * factorial(l - i - j))


def orthant_u(K: int, l: int) -> Fraction:
    return Fraction(factorial(l - K + 1) * factorial(l + K + 2),
                    K ** l * (K + 1) ** l * factorial(2 * K + 1))


def orthant_v(K: int, l: int) -> Fraction:
    return Fraction(factorial(2 * K + 1) * K ** l * (K + 1) ** l,
                    (l + 1) * (l + 2) * factorial(l + K + 1) * factorial(l - K))


def truncated_orthant3_gauge(K: int, depth: int):
    """Diamond-cubic orthant gauge: w = trinomial * u_l, b = v_l / trinomial."""
    region = build_truncated_orthant3(K, depth)
    f = tuple(_trinomial(i + j + k, i, j) * orthant_u(K, i + j + k)
              for (i, j, k) in region.white_coords)
    g = tuple(orthant_v(K, i + j + k) / _trinomial(i + j + k, i, j)
              for (i, j, k) in region.black_coords)
    return region, GaugePair(region, f, g)


_CLOSED_FORMS = {
    "aztec_diamond": aztec_diamond_gauge,
    "aztec_cuboid": aztec_cuboid_gauge,
    "trunc_quadrant": truncated_quadrant_gauge,
    "trunc_orthant3": truncated_orthant3_gauge,
}


def closed_form_gauge(shape: str, *params):
    """Dispatch to the exact gauge for a named shape; returns (region, gauge)."""
    key = shape.lower().replace("-", "_")
    if key not in _CLOSED_FORMS:
        raise ValueError(f"no closed-form gauge for {shape!r}; "
                         f"known: {sorted(_CLOSED_FORMS)}")
    return _CLOSED_FORMS[key](*params)
