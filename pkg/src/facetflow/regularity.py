"""Regularity diagnostics on solved discrete fields.

Balls are resolved by element centroids and all integrals are
area-weighted sums over the selected elements, so every quantity here is
exact for the piecewise-constant gradient field and carries an O(h)
geometric error relative to the continuous ball.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import sampling
from .density import flux, frob, truncate, truncate_relaxed


class EmptyBall(ValueError):
    """No element centroid lies in the requested ball."""


class InsufficientPairs(ValueError):
    """The pair budget is too small for a meaningful envelope fit."""


class ContractViolation(ValueError):
    """Inputs outside the admissible parameter range."""


# ---------------------------------------------------------------------------
# element fields
# ---------------------------------------------------------------------------


def relaxed_modulus(field, epsilon):
    """``V = sqrt(eps^2 + |Du|^2)`` per element."""
    Du = field.Du
    return np.sqrt(epsilon**2 + np.sum(Du * Du, axis=(1, 2)))


def excess_level(field, delta, epsilon):
    """``U = (V - delta)_+^2`` per element."""
    return np.maximum(relaxed_modulus(field, epsilon) - delta, 0.0) ** 2


def facet_mask(field, threshold):
    """Elements with ``|Du| <= threshold`` and their area fraction."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    mask = frob(field.Du) <= threshold
    a = field.mesh.element_area
    return mask, float(a[mask].sum() / a.sum())


def yield_mask(field, params):
    """Elements where the stress stays below the yield value, ``|A_eps(Du)| <= b``."""
    return frob(flux(field.Du, params)) <= params.b


def plug_radius(field, params):
    """Radius of the disk with the same area as the yield region."""
    mask = yield_mask(field, params)
    return float(math.sqrt(field.mesh.element_area[mask].sum() / math.pi))


def _ball(field, x0, r):
    d = np.hypot(*(field.mesh.centroids - np.asarray(x0, float)).T)
    sel = d < r
    if not sel.any():
        raise EmptyBall(f"no element centroid within {r:g} of {tuple(x0)}")
    return sel


def superlevel_measure(field, x0, rho, mu, nu, params):
    """Area fraction of ``{V - delta > (1 - nu) mu}`` in the ball ``B_rho(x0)``."""
    if not 0 < nu < 1:
        raise ValueError("nu must lie in (0, 1)")
    sel = _ball(field, x0, rho)
    V = relaxed_modulus(field, params.epsilon)[sel]
    a = field.mesh.element_area[sel]
    inside = V - params.delta > (1.0 - nu) * mu
    return float(a[inside].sum() / a.sum())


def _weighted_oscillation(W, a, center=None):
    # shifting by a sample first makes a constant W give exactly zero
    ref = W[0]
    W = W - ref
    if center is None:
        center = np.tensordot(a, W, axes=(0, 0)) / a.sum()
    else:
        center = center - ref
    d = W - center
    return float(np.sum(a * np.sum(d * d, axis=(1, 2))) / a.sum())


def excess(field, x0, r, variant, params):
    """Mean-squared oscillation of ``Du`` (``"Phi"``) or of ``G_{2delta,eps}(Du)``
    (``"Psi"``) over ``B_r(x0)``."""
    sel = _ball(field, x0, r)
    Du = field.Du[sel]
    if variant in ("Phi", "phi"):
        W = Du
    elif variant in ("Psi", "Psi_2delta_eps", "psi"):
        W = truncate_relaxed(Du, 2.0 * params.delta, params.epsilon)
    else:
        raise ValueError(f"unknown excess variant {variant!r}")
    return _weighted_oscillation(W, field.mesh.element_area[sel])


# ---------------------------------------------------------------------------
# Hölder envelope fit
# ---------------------------------------------------------------------------


@dataclass
class HolderFit:
    alpha: float
    constant: float
    residual: float
    status: str
    pairs_used: int
    distances: np.ndarray = field(repr=False, default=None)
    differences: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "alpha": None if math.isnan(self.alpha) else self.alpha,
            "constant": self.constant,
            "residual": None if math.isnan(self.residual) else self.residual,
            "status": self.status,
            "pairs_used": self.pairs_used,
        }


def holder_seminorm(field, delta, params, pair_budget=20000, seed=0, bins=32,
                    min_separation=None, max_separation=None):
    """Fit ``|dG| <= C |dx|^alpha`` to the binned upper envelope of
    ``G = G_{2 delta, eps}(Du)`` sampled on centroid pairs.

    Pairs are stratified in separation: a random element is paired with
    the centroid nearest to a point at log-uniform distance in a random
    direction.  The fit window defaults to one mesh width up to an
    eighth of the domain extent; below it the piecewise-constant field
    only shows element jumps, above it ``G`` saturates.
    """
    if pair_budget < 100:
        raise InsufficientPairs(f"pair_budget={pair_budget} < 100")
    params.with_(delta=delta).require_joint()
    mesh = field.mesh
    G = truncate_relaxed(field.Du, 2.0 * delta, params.epsilon)
    c = mesh.centroids
    if not np.any(frob(G - G[0]) > 0):
        return HolderFit(math.nan, 0.0, math.nan, "constant field", 0,
                         np.zeros(0), np.zeros(0))
    extent = float(np.max(mesh.vertices.max(0) - mesh.vertices.min(0)))
    lo = mesh.h if min_separation is None else float(min_separation)
    hi = extent / 8.0 if max_separation is None else float(max_separation)
    if not 0 < lo < hi:
        raise ValueError(f"empty separation window [{lo:g}, {hi:g}]")
    rng = sampling.substream(seed, 0x486F6C64)
    i = rng.integers(0, len(c), pair_budget)
    r = sampling.log_uniform(rng, pair_budget, lo, hi)
    th = rng.uniform(0.0, 2.0 * np.pi, pair_budget)
    target = c[i] + r[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    miss, j = cKDTree(c).query(target)
    ok = (j != i) & (miss < mesh.h)
    i, j = i[ok], j[ok]
    dx = np.hypot(*(c[i] - c[j]).T)
    dG = frob(G[i] - G[j])
    use = (dx >= lo) & (dx <= hi) & (dG > 0)
    edges = np.geomspace(lo, hi, bins + 1)
    which = np.digitize(dx, edges) - 1
    xs, ys = [], []
    for b in range(bins):
        sel = use & (which == b)
        if not sel.any():
            continue
        k = np.flatnonzero(sel)[np.argmax(dG[sel])]
        xs.append(math.log(dx[k]))
        ys.append(math.log(dG[k]))
    if len(xs) < 2:
        return HolderFit(math.nan, 0.0, math.nan, "too few bins", len(dx), dx, dG)
    xs, ys = np.array(xs), np.array(ys)
    A = np.column_stack([xs, np.ones_like(xs)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - ys) ** 2)))
    return HolderFit(float(slope), float(math.exp(icpt)), resid, "ok", len(dx), dx, dG)


# ---------------------------------------------------------------------------
# De Giorgi schedule
# ---------------------------------------------------------------------------


@dataclass
class DeGiorgiSchedule:
    rho0: float
    mu0: float
    kappa: float
    beta: float
    alpha: float
    rows: list  # (k, rho_k, mu_k)
    feasible: list | None = None  # per k: sqrt(C rho_k^beta) <= mu_{k+1}

    def to_dict(self):
        return {
            "rho0": self.rho0,
            "mu0": self.mu0,
            "kappa": self.kappa,
            "beta": self.beta,
            "alpha": self.alpha,
            "rows": [list(r) for r in self.rows],
            "feasible": self.feasible,
        }


def de_giorgi_schedule(rho0, mu0, kappa, beta, K=20, C_star=None):
    """Radii ``4^-k rho0`` and levels ``kappa^k mu0`` with ``4^-alpha = kappa``."""
    if not 0 < beta < 1:
        raise ContractViolation("beta must lie in (0, 1)")
    if not 2.0 ** (-beta) < kappa < 1.0:
        raise ContractViolation(f"kappa={kappa} outside (2^-beta, 1) = ({2.0 ** -beta:.6g}, 1)")
    if rho0 <= 0 or mu0 <= 0:
        raise ContractViolation("rho0 and mu0 must be positive")
    alpha = -math.log(kappa) / math.log(4.0)
    rows = [(k, rho0 * 4.0**-k, mu0 * kappa**k) for k in range(K + 1)]
    feasible = None
    if C_star is not None:
        feasible = [
            math.sqrt(C_star * rows[k][1] ** beta) <= mu0 * kappa ** (k + 1) for k in range(K + 1)
        ]
    return DeGiorgiSchedule(float(rho0), float(mu0), float(kappa), float(beta), alpha, rows, feasible)


# ---------------------------------------------------------------------------
# Lipschitz diagnostic
# ---------------------------------------------------------------------------


def lipschitz_diagnostic(field, balls, f, params, q=4.0):
    """Per ball ``(x0, rho, theta)``: sup of ``V`` on ``B_{theta rho}`` and the
    quantities a local bound is expressed in."""
    V = relaxed_modulus(field, params.epsilon)
    a = field.mesh.element_area
    f = np.asarray(f, float)
    if f.ndim == 1:
        f = f[:, None]
    fe = np.broadcast_to(f, (field.mesh.n_vertices, field.N))[field.mesh.triangles].mean(axis=1)
    fmod = np.sqrt(np.sum(fe * fe, axis=1))
    rows = []
    for x0, rho, theta in balls:
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        inner = _ball(field, x0, theta * rho)
        outer = _ball(field, x0, rho)
        rows.append({
            "x0": [float(v) for v in x0],
            "rho": float(rho),
            "theta": float(theta),
            "sup_V": float(V[inner].max()),
            "f_Lq": float(np.sum(a[outer] * fmod[outer] ** q) ** (1.0 / q)),
            "V_Lp": float(np.sum(a[outer] * V[outer] ** params.p) ** (1.0 / params.p)),
            "gap": float((1.0 - theta) * rho),
        })
    return rows


def truncation_gap(field, delta1, delta2):
    """``sup |G_delta1(Du) - G_delta2(Du)|`` over elements."""
    Du = field.Du
    return float(np.max(frob(truncate(Du, delta1) - truncate(Du, delta2))))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class RegularityReport:
    mesh_h: float
    facet_fraction: float
    plug_radius: float
    superlevel_measures: list
    excess_table: list
    holder_fit: HolderFit
    lipschitz: list
    schedule: DeGiorgiSchedule | None = None

    def to_dict(self):
        return {
            "schema": "facetflow.regularity_report/1",
            "mesh_h": self.mesh_h,
            "facet_fraction": self.facet_fraction,
            "plug_radius": self.plug_radius,
            "superlevel_measures": self.superlevel_measures,
            "excess_table": self.excess_table,
            "holder_fit": self.holder_fit.to_dict(),
            "lipschitz": self.lipschitz,
            "schedule": self.schedule.to_dict() if self.schedule else None,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def excess_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x0", "y0", "r", "Phi", "Psi"])
        for row in self.excess_table:
            w.writerow([_g(row["x0"][0]), _g(row["x0"][1]), _g(row["r"]), _g(row["Phi"]), _g(row["Psi"])])
        return buf.getvalue()

    def holder_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["distance", "difference"])
        for d, g in zip(self.holder_fit.distances, self.holder_fit.differences):
            w.writerow([_g(d), _g(g)])
        return buf.getvalue()


def _g(x):
    return format(float(x), ".17g")


def default_centers(field, count, seed=0, radius=None):
    """Deterministic ball centres at element centroids whose ball of the
    given radius stays inside the mesh bounding box."""
    c = field.mesh.centroids
    lo, hi = field.mesh.vertices.min(0), field.mesh.vertices.max(0)
    ok = np.ones(len(c), bool)
    if radius is not None:
        ok = np.all((c - radius > lo) & (c + radius < hi), axis=1)
        if field.mesh.spec.get("kind") == "disk":
            ctr = np.asarray(field.mesh.spec.get("center", (0.0, 0.0)))
            ok = np.hypot(*(c - ctr).T) + radius < field.mesh.spec["radius"]
    idx = np.flatnonzero(ok)
    if len(idx) == 0:
        raise EmptyBall("no admissible ball centre")
    rng = sampling.substream(seed, 0x42616C6C)
    pick = rng.choice(idx, size=min(count, len(idx)), replace=False)
    return [tuple(map(float, c[k])) for k in np.sort(pick)]


def analyze(field, f, params, delta=None, radii=(0.1, 0.2), n_centers=8, seed=0,
            pair_budget=20000, facet_threshold=None, schedule=None):
    """Assemble a :class:`RegularityReport` for a solved field."""
    delta = params.delta if delta is None else delta
    prm = params.with_(delta=delta)
    Du = field.Du
    thr = 1e-3 * float(frob(Du).max()) if facet_threshold is None else facet_threshold
    _, frac = facet_mask(field, thr)
    excess_rows = []
    for r in radii:
        for x0 in default_centers(field, n_centers, seed, r):
            excess_rows.append({
                "x0": list(x0), "r": float(r),
                "Phi": excess(field, x0, r, "Phi", prm),
                "Psi": excess(field, x0, r, "Psi", prm),
            })
    r0 = max(radii)
    levels = []
    for x0 in default_centers(field, n_centers, seed + 1, r0):
        for mu, nu in ((0.05, 0.5), (0.1, 0.5)):
            levels.append({"x0": list(x0), "rho": r0, "mu": mu, "nu": nu,
                           "fraction": superlevel_measure(field, x0, r0, mu, nu, prm)})
    balls = [(x0, r0, 0.5) for x0 in default_centers(field, n_centers, seed + 2, r0)]
    fit = holder_seminorm(field, delta, prm, pair_budget, seed)
    sched = de_giorgi_schedule(**schedule) if schedule else None
    return RegularityReport(
        mesh_h=field.mesh.h,
        facet_fraction=frac,
        plug_radius=plug_radius(field, prm),
        superlevel_measures=levels,
        excess_table=excess_rows,
        holder_fit=fit,
        lipschitz=lipschitz_diagnostic(field, balls, f, prm),
        schedule=sched,
    )
