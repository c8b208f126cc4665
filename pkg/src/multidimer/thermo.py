"""Free energy, surface tension, and Legendre duality per lattice.

F(alpha) = log sum_j w_j exp(e_j . alpha) over the D edge vectors; the surface
tension sigma is its Legendre dual on the Newton polytope.  grad F and grad
sigma are inverse maps; grad sigma is computed by a damped Newton solve of
grad F(alpha) = s (F is strictly convex and analytic, so this is robust on the
open polytope; the gradient blows up at the boundary).

All point functions accept arrays with a trailing slope/field axis and
broadcast over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import LatticeName, LatticeSpec, NewtonPolytope, build_lattice, newton_polytope

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200


class DomainError(ValueError):
    """Slope outside the Newton polytope (or too close to its boundary)."""


@dataclass(frozen=True)
class ThermoModel:
    lattice: LatticeSpec
    type_weights: tuple | None = None   # per-type positive weights; None = uniform

    @cached_property
    def E(self) -> np.ndarray:
        return self.lattice.edge_vectors_float

    @cached_property
    def log_weights(self) -> np.ndarray:
        if self.type_weights is None:
            return np.zeros(self.lattice.degree)
        w = np.array([float(x) for x in self.type_weights])
        if w.shape != (self.lattice.degree,) or np.any(w <= 0):
            raise ValueError("type_weights must be D positive numbers")
        return np.log(w)

    @cached_property
    def polytope(self) -> NewtonPolytope:
        return newton_polytope(self.lattice)

    @property
    def has_closed_form_sigma(self) -> bool:
        return self.type_weights is None and self.lattice.name in (
            LatticeName.Z2_DIAG, LatticeName.BCC, LatticeName.HONEYCOMB)


def thermo_model(lattice, type_weights=None) -> ThermoModel:
    if not isinstance(lattice, LatticeSpec):
        lattice = build_lattice(lattice)
    return ThermoModel(lattice=lattice,
                       type_weights=None if type_weights is None else tuple(type_weights))


# ---------------------------------------------------------------------------
# Free energy side
# ---------------------------------------------------------------------------

def _scores(model, alpha):
    alpha = np.asarray(alpha, dtype=float)
    return alpha @ model.E.T + model.log_weights


def edge_probabilities(model: ThermoModel, alpha) -> np.ndarray:
    t = _scores(model, alpha)
    t = t - t.max(axis=-1, keepdims=True)
    p = np.exp(t)
    return p / p.sum(axis=-1, keepdims=True)


def free_energy(model: ThermoModel, alpha):
    """F(alpha) = log sum_j w_j exp(e_j . alpha), max-subtracted."""
    t = _scores(model, alpha)
    m = t.max(axis=-1)
    out = m + np.log(np.exp(t - m[..., None]).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def grad_free_energy(model: ThermoModel, alpha) -> np.ndarray:
    """The slope sum_j p_j e_j; always in the open Newton polytope."""
    return edge_probabilities(model, alpha) @ model.E


def hessian_free_energy(model: ThermoModel, alpha) -> np.ndarray:
    """Covariance of the edge-vector distribution at alpha (positive definite)."""
    p = edge_probabilities(model, alpha)
    s = p @ model.E
    h = np.einsum("...j,jk,jl->...kl", p, model.E, model.E)
    return h - s[..., :, None] * s[..., None, :]


# ---------------------------------------------------------------------------
# Legendre dual side
# ---------------------------------------------------------------------------

def _newton_alpha(model, s, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Damped Newton for grad F(alpha) = s, batched over leading axes."""
    s = np.asarray(s, dtype=float)
    alpha = np.zeros_like(s)
    # objective phi = F(alpha) - s.alpha, minimized at the solution
    phi = free_energy(model, alpha) - np.sum(s * alpha, axis=-1)
    for _ in range(max_iter):
        r = grad_free_energy(model, alpha) - s
        if np.abs(r).max() <= tol:
            return alpha
        H = hessian_free_energy(model, alpha)
        try:
            step = np.linalg.solve(H, r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        t = np.ones(s.shape[:-1])
        for _bt in range(60):
            cand = alpha - t[..., None] * step
            phi_new = free_energy(model, cand) - np.sum(s * cand, axis=-1)
            bad = np.asarray(phi_new > phi)
            if not bad.any():
                break
            t = np.where(bad, t / 2, t)
        alpha = alpha - t[..., None] * step
        phi = free_energy(model, alpha) - np.sum(s * alpha, axis=-1)
    r = np.abs(grad_free_energy(model, alpha) - s).max(axis=-1)
    worst = np.unravel_index(np.argmax(r), r.shape) if r.ndim else ()
    sw = s[worst] if r.ndim else s
    raise DomainError(
        f"Newton solve for grad F = s did not converge (residual {float(np.max(r)):.2e}); "
        f"slope {np.array2string(np.atleast_1d(sw), precision=6)} is "
        f"{model.polytope.distance_to_boundary(sw):.3e} from the polytope boundary")


def grad_surface_tension(model: ThermoModel, s) -> np.ndarray:
    """The alpha with grad F(alpha) = s (Newton), for s in the open polytope."""
    s_arr = np.asarray(s, dtype=float)
    flat = s_arr.reshape(-1, s_arr.shape[-1])
    for row in flat:
        if not model.polytope.contains(row):
            raise DomainError(f"slope {row} outside the Newton polytope "
                              f"(signed distance {model.polytope.distance_to_boundary(row):.3e})")
    return _newton_alpha(model, s_arr)


def surface_tension(model: ThermoModel, s, method: str = "auto"):
    """sigma(s) = max_alpha s.alpha - F(alpha).

    method: "newton" (dual solve), "closed" (per-lattice formula, defined on
    the closed polytope with 0 log 0 = 0), or "auto" (closed form when the
    lattice has one, else newton with a boundary fallback through the
    minimal-face entropy representation).
    """
    s_arr = np.asarray(s, dtype=float)
    if method not in ("auto", "newton", "closed"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" or (method == "auto" and model.has_closed_form_sigma):
        return sigma_closed_form(model, s_arr)
    flat = s_arr.reshape(-1, s_arr.shape[-1])
    out = np.empty(flat.shape[0])
    for i, row in enumerate(flat):
        d = model.polytope.distance_to_boundary(row)
        if d < -model.polytope.tol:
            raise DomainError(f"slope {row} outside the Newton polytope by {-d:.3e}")
        if method == "auto" and d <= 1e-7:
            out[i] = _sigma_on_face(model, row)
        else:
            alpha = _newton_alpha(model, row)
            out[i] = float(np.sum(row * alpha) - free_energy(model, alpha))
    out = out.reshape(s_arr.shape[:-1])
    return float(out) if out.ndim == 0 else out


def _sigma_on_face(model, s):
    """Min-entropy representation on the minimal face containing boundary s.

    Any p representing a boundary slope is supported on the edge vectors lying
    on the active facets; those faces are simplices for the supported
    lattices, so the barycentric representation is unique.
    """
    eqs = model.polytope.equations
    act = np.abs(eqs[:, :-1] @ s + eqs[:, -1]) <= 1e-7
    verts = model.E
    on_face = np.ones(len(verts), dtype=bool)
    for row in eqs[act]:
        on_face &= np.abs(verts @ row[:-1] + row[-1]) <= 1e-9
    V = verts[on_face]
    if len(V) == 0:
        raise DomainError(f"no face vertices found for boundary slope {s}")
    A = np.vstack([V.T, np.ones(len(V))])
    b = np.concatenate([s, [1.0]])
    lam, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.any(lam < -1e-8) or np.abs(A @ lam - b).max() > 1e-8:
        raise DomainError(f"boundary slope {s} has no convex face representation")
    lam = np.clip(lam, 0.0, None)
    return float(np.sum(_xlogx(lam)))


def hessian_surface_tension(model: ThermoModel, s) -> np.ndarray:
    """Hess sigma(s) = [Hess F(alpha)]^{-1} at alpha = grad sigma(s)."""
    alpha = grad_surface_tension(model, s)
    return np.linalg.inv(hessian_free_energy(model, alpha))


def slope_to_edge_probabilities(model: ThermoModel, s) -> np.ndarray:
    """The unique p in the simplex with sum p_j e_j = s (softmax at grad sigma)."""
    return edge_probabilities(model, grad_surface_tension(model, s))


def entropy_per_dimer(model: ThermoModel, weights) -> float:
    """F(w) - sum w_i log w_i / sum w_i; equals -sigma at s = sum p_i e_i."""
    w = np.array([float(x) for x in weights])
    if w.shape != (model.lattice.degree,) or np.any(w <= 0):
        raise ValueError("need D positive weights")
    return float(np.log(w.sum()) - (w * np.log(w)).sum() / w.sum())


# ---------------------------------------------------------------------------
# Closed forms (dtype-generic: float64 or longdouble)
# ---------------------------------------------------------------------------

def _xlogx(t):
    t = np.asarray(t)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] * np.log(t[pos])
    return out


def _binary_sigma_term(si):
    return _xlogx((1 + 2 * si) / 2) + _xlogx((1 - 2 * si) / 2)


def sigma_closed_form(model: ThermoModel, s):
    """Per-lattice closed form on the closed polytope, 0 log 0 = 0."""
    s = np.asarray(s)
    name = model.lattice.name
    if model.type_weights is not None:
        raise ValueError("closed forms cover uniform weights only")
    if name in (LatticeName.Z2_DIAG, LatticeName.BCC):
        out = sum(_binary_sigma_term(s[..., i]) for i in range(model.lattice.dim))
    elif name == LatticeName.HONEYCOMB:
        p2 = s[..., 0] + 1.0 / 3.0
        p3 = s[..., 1] + 1.0 / 3.0
        p1 = 1.0 - p2 - p3
        if np.any(p1 < -1e-12) or np.any(p2 < -1e-12) or np.any(p3 < -1e-12):
            raise DomainError("slope outside the honeycomb Newton polygon")
        out = _xlogx(np.clip(p1, 0, None)) + _xlogx(np.clip(p2, 0, None)) \
            + _xlogx(np.clip(p3, 0, None))
    else:
        raise ValueError(f"no closed-form surface tension for {name.value} "
                         "(Z3 involves a degree-8 polynomial root; use the newton path)")
    return float(out) if out.ndim == 0 else out


def grad_sigma_closed_form(model: ThermoModel, s):
    """Analytic grad sigma for the closed-form lattices (dtype preserved)."""
    s = np.asarray(s)
    name = model.lattice.name
    if name in (LatticeName.Z2_DIAG, LatticeName.BCC):
        return 2 * np.arctanh(2 * s)
    if name == LatticeName.HONEYCOMB:
        p2 = s[..., 0] + 1.0 / 3.0
        p3 = s[..., 1] + 1.0 / 3.0
        p1 = 1.0 - p2 - p3
        return np.stack([np.log(p2 / p1), np.log(p3 / p1)], axis=-1)
    raise ValueError(f"no closed-form gradient for {name.value}")


# Honeycomb (s,t) edge-fraction coordinates: (s,t) = (p_2, p_3), the fractions
# of the (2/3,-1/3) and (-1/3,2/3) edge types; vector slope = (s-1/3, t-1/3).

def honeycomb_st_to_slope(st):
    st = np.asarray(st)
    return st - 1.0 / 3.0


def honeycomb_slope_to_st(s):
    s = np.asarray(s)
    return s + 1.0 / 3.0


def sigma_honeycomb_st(st):
    """s log s + t log t + (1-s-t) log(1-s-t) in edge-fraction coordinates."""
    st = np.asarray(st)
    s, t = st[..., 0], st[..., 1]
    out = _xlogx(s) + _xlogx(t) + _xlogx(1 - s - t)
    return float(out) if out.ndim == 0 else out


def grad_sigma_honeycomb_st(st):
    st = np.asarray(st)
    s, t = st[..., 0], st[..., 1]
    r = 1 - s - t
    return np.stack([np.log(s / r), np.log(t / r)], axis=-1)
