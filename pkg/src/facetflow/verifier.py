"""Seeded randomized certification of the quantitative estimates.

Each inequality is registered as a sampler plus an evaluator.  The
evaluator maps a batch of sample points to arrays ``lhs``, ``rhs`` and a
per-sample ``scale``; a sample violates the inequality ``lhs <= rhs`` when
``lhs - rhs > slack * scale``.  Samples are drawn in fixed-size chunks,
each from its own substream keyed by (seed, inequality, dims, params,
chunk), so a report does not depend on how chunks are spread over
workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend, sampling
from .density import (
    C_DAGGER,
    ModelParams,
    coefficient_matrix_C,
    energy_density,
    flatten,
    flux,
    frob,
    gp_eps_inverse,
    gp_eps_map,
    hessian,
    hessian_eigenvalues,
    truncate,
    truncate_relaxed,
    unflatten,
)

SCHEMA = "facetflow.sweep_report/1"
MAX_WITNESSES = 5


# ---------------------------------------------------------------------------
# configuration and report types
# ---------------------------------------------------------------------------


def _default_grid():
    return [ModelParams(b=1.0, p=p, delta=0.5, epsilon=0.1) for p in (1.5, 2.0, 3.0)]


@dataclass
class SweepConfig:
    seed: int = 20240611
    samples: int = 10_000
    dims: list = field(default_factory=lambda: [(1, 2), (2, 2), (3, 3)])
    param_grid: list = field(default_factory=_default_grid)
    radius_range: tuple = sampling.DEFAULT_RADIUS_RANGE
    slack: float = 1e-9
    chunk: int = 50_000
    workers: int = 1

    def validate(self):
        if int(self.samples) < 1:
            raise ValueError("samples must be >= 1")
        lo, hi = self.radius_range
        if not (0 < lo < hi):
            raise ValueError("radius_range must be positive and ordered")
        if not self.dims:
            raise ValueError("dims must not be empty")
        for N, n in self.dims:
            if N < 1 or n < 2:
                raise ValueError(f"dims entry {(N, n)} needs N >= 1 and n >= 2")
        if not self.param_grid:
            raise ValueError("param_grid must not be empty")
        if self.chunk < 1 or self.workers < 1:
            raise ValueError("chunk and workers must be positive")
        return self

    def to_dict(self):
        return {
            "seed": int(self.seed),
            "samples": int(self.samples),
            "dims": [[int(N), int(n)] for N, n in self.dims],
            "param_grid": [p.to_dict() for p in self.param_grid],
            "radius_range": [float(x) for x in self.radius_range],
            "slack": float(self.slack),
            "chunk": int(self.chunk),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kw = {}
        for key in ("seed", "samples", "slack", "chunk", "workers"):
            if key in d:
                kw[key] = d.pop(key)
        if "dims" in d:
            kw["dims"] = [tuple(x) for x in d.pop("dims")]
        if "param_grid" in d:
            kw["param_grid"] = [ModelParams.from_dict(p) for p in d.pop("param_grid")]
        if "radius_range" in d:
            kw["radius_range"] = tuple(d.pop("radius_range"))
        if d:
            raise ValueError(f"unknown sweep config keys: {sorted(d)}")
        return cls(**kw)


@dataclass
class InequalityResult:
    checked: int = 0
    violations: int = 0
    skipped: int = 0
    worst_margin: float = math.inf
    empirical_constant: float | None = None
    constant_kind: str | None = None
    witnesses: list = field(default_factory=list)

    def merge(self, other):
        self.checked += other.checked
        self.violations += other.violations
        self.skipped += other.skipped
        self.worst_margin = min(self.worst_margin, other.worst_margin)
        if other.empirical_constant is not None:
            if self.empirical_constant is None:
                self.empirical_constant = other.empirical_constant
            elif self.constant_kind == "inf":
                self.empirical_constant = min(self.empirical_constant, other.empirical_constant)
            else:
                self.empirical_constant = max(self.empirical_constant, other.empirical_constant)
        room = MAX_WITNESSES - len(self.witnesses)
        if room > 0:
            self.witnesses.extend(other.witnesses[:room])

    def to_dict(self):
        return {
            "checked": self.checked,
            "violations": self.violations,
            "skipped": self.skipped,
            "worst_margin": _finite_or_none(self.worst_margin),
            "empirical_constant": _finite_or_none(self.empirical_constant),
            "constant_kind": self.constant_kind,
            "witnesses": self.witnesses,
        }


@dataclass
class SweepReport:
    config: SweepConfig
    results: dict

    @property
    def passed(self):
        return all(r.violations == 0 for r in self.results.values())

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "status": self.status,
            "config": self.config.to_dict(),
            "inequalities": {k: v.to_dict() for k, v in self.results.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["inequality", "checked", "violations", "skipped",
                    "worst_margin", "empirical_constant", "constant_kind"])
        for k, r in self.results.items():
            w.writerow([k, r.checked, r.violations, r.skipped, _fmt(r.worst_margin),
                        _fmt(r.empirical_constant), r.constant_kind or ""])
        return buf.getvalue()


def _finite_or_none(x):
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def _fmt(x):
    if x is None or not math.isfinite(x):
        return ""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# inequality registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Inequality:
    name: str
    sample: object  # (rng, count, N, n, radius_range, params) -> dict of arrays
    evaluate: object  # (points, params) -> (lhs, rhs, tol_scale, ratio or None)
    joint: bool = False
    constant_kind: str | None = None
    include_zero: bool = False


REGISTRY: dict[str, Inequality] = {}


def _register(name, *, joint=False, kind=None, include_zero=False):
    def deco(pair):
        sample, evaluate = pair
        REGISTRY[name] = Inequality(name, sample, evaluate, joint, kind, include_zero)
        return pair

    return deco


def _single(rng, count, N, n, rr, params):
    return {"xi": sampling.matrices(rng, count, N, n, rr)}


def _pair(rng, count, N, n, rr, params):
    x0, x1 = sampling.pairs(rng, count, N, n, rr)
    return {"xi0": x0, "xi1": x1}


def _dot(a, b):
    return np.sum(a * b, axis=(-2, -1))


# -- truncation maps ---------------------------------------------------------


def _eval_g2_lipschitz(pts, params):
    x0, x1 = pts["xi0"], pts["xi1"]
    dg, dx = _backend.kernels.truncation_quotients(
        flatten(x0), flatten(x1), 2.0 * params.delta, params.epsilon
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dx > 0, dg / dx, np.nan)
    rhs = C_DAGGER * dx
    return dg, rhs, rhs, ratio


_register("G2delta_lipschitz", joint=True, kind="sup")((_pair, _eval_g2_lipschitz))


def _eval_proximity(pts, params):
    xi = pts["xi"]
    d = frob(truncate_relaxed(xi, params.delta, params.epsilon) - truncate(xi, params.delta))
    eps = np.full_like(d, params.epsilon)
    return d, eps, np.maximum(frob(xi), eps), d / eps


_register("relaxation_proximity", joint=True, kind="sup", include_zero=True)(
    (_single, _eval_proximity)
)


def _eval_chain(pts, params):
    xi = pts["xi"]
    lhs = frob(truncate_relaxed(xi, 2.0 * params.delta, params.epsilon))
    rhs = np.maximum(frob(truncate_relaxed(xi, params.delta, params.epsilon)) - params.delta, 0.0)
    return lhs, rhs, np.maximum(frob(xi), params.delta), None


_register("chain_bound", joint=True, include_zero=True)((_single, _eval_chain))


def _sample_levels(rng, count, N, n, rr, params):
    mu = sampling.log_uniform(rng, count, *rr)
    return {"xi": sampling.matrices(rng, count, N, n, rr), "mu": mu}


def _eval_equivalence(pts, params):
    xi, mu = pts["xi"], pts["mu"]
    g_small = frob(truncate_relaxed(xi, params.delta, params.epsilon)) <= mu
    v = np.sqrt(params.epsilon**2 + _dot(xi, xi))
    v_small = v <= mu + params.delta
    lhs = (g_small != v_small).astype(float)
    # membership decided by a last-bit rounding tie is not a counterexample
    tie = np.abs(v - mu - params.delta) <= 1e-12 * (mu + params.delta)
    lhs = np.where(tie, 0.0, lhs)
    return lhs, np.zeros_like(lhs), np.zeros_like(lhs), None


_register("boundedness_equivalence", joint=True)((_sample_levels, _eval_equivalence))


# -- Hessian spectra -------------------------------------------------------------


def _sigma(xi, params):
    return params.epsilon**2 + _dot(xi, xi)


def _eval_bp_sandwich(pts, params):
    xi = pts["xi"]
    lam1, lam2 = hessian_eigenvalues(xi, params, branch="p")
    w = _sigma(xi, params) ** (params.p / 2 - 1)
    lo, hi = params.gamma * w, 3.0 * params.Gamma * w
    lmin, lmax = np.minimum(lam1, lam2), np.maximum(lam1, lam2)
    lhs = np.maximum(lo - lmin, lmax - hi)
    return lhs, np.zeros_like(lhs), hi, lmax / (params.Gamma * w)


_register("Bp_sandwich", kind="sup", include_zero=True)((_single, _eval_bp_sandwich))


def _eval_b1_sandwich(pts, params):
    xi = pts["xi"]
    lam1, lam2 = hessian_eigenvalues(xi, params, branch="1")
    hi = params.b / np.sqrt(_sigma(xi, params))
    lmin, lmax = np.minimum(lam1, lam2), np.maximum(lam1, lam2)
    lhs = np.maximum(-lmin, lmax - hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(hi > 0, lmax / hi, np.nan)
    return lhs, np.zeros_like(lhs), hi, ratio


_register("B1_sandwich", kind="sup", include_zero=True)((_single, _eval_b1_sandwich))


def _eval_c_sandwich(pts, params):
    Du = pts["xi"]
    ev = np.linalg.eigvalsh(coefficient_matrix_C(Du, params))
    V = np.sqrt(_sigma(Du, params))
    lo = params.gamma * V ** (params.p - 2)
    hi = params.b / V + 3.0 * params.Gamma * V ** (params.p - 2)
    lhs = np.maximum(lo - ev[..., 0], ev[..., -1] - hi)
    return lhs, np.zeros_like(lhs), hi, ev[..., -1] / hi


_register("C_sandwich", kind="sup", include_zero=True)((_single, _eval_c_sandwich))


# -- monotonicity and growth -------------------------------------------------------


def _eval_monotonicity(pts, params):
    x0, x1 = pts["xi0"], pts["xi1"]
    d = x1 - x0
    inner = _dot(flux(x1, params) - flux(x0, params), d)
    tol = 1e-12 * (1.0 + frob(x0) + frob(x1)) ** (2.0 * params.p)
    dd = _dot(d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dd > 0, inner / dd, np.nan)
    # tolerance is absolute here: lhs - rhs > tol  <=>  -inner > tol
    return -inner, np.zeros_like(inner), tol, ratio


_register("monotonicity", kind="inf")((_pair, _eval_monotonicity))


def _eval_a1_growth(pts, params):
    x0, x1 = pts["xi0"], pts["xi1"]
    dA = frob(flux(x1, params, "1") - flux(x0, params, "1"))
    dx = frob(x1 - x0)
    big = np.maximum(frob(x0), frob(x1))
    rhs = 2.0 * params.b * dx / big
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dx > 0, dA * big / (params.b * dx), np.nan)
    return dA, rhs, rhs, ratio


_register("A1_growth", kind="sup")((_pair, _eval_a1_growth))


def _eval_ap_monotone_constant(pts, params):
    x0, x1 = pts["xi0"], pts["xi1"]
    d = x1 - x0
    inner = _dot(flux(x1, params, "p") - flux(x0, params, "p"), d)
    dx = frob(d)
    p = params.p
    if p >= 2:
        denom = params.gamma * dx**p
    else:
        base = params.epsilon**2 + _dot(x0, x0) + _dot(x1, x1)
        denom = params.gamma * base ** ((p - 2) / 2) * dx**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, inner / denom, np.nan)
    lhs = -inner
    return lhs, np.zeros_like(lhs), 1e-12 * (1.0 + frob(x0) + frob(x1)) ** (2.0 * p), ratio


_register("Ap_monotonicity_constant", kind="inf")((_pair, _eval_ap_monotone_constant))


def _eval_ap_growth_constant(pts, params):
    x0, x1 = pts["xi0"], pts["xi1"]
    dA = frob(flux(x1, params, "p") - flux(x0, params, "p"))
    dx = frob(x1 - x0)
    p = params.p
    if p >= 2:
        denom = params.Gamma * (
            params.epsilon ** (p - 2) + frob(x0) ** (p - 2) + frob(x1) ** (p - 2)
        ) * dx
    else:
        denom = params.Gamma * dx ** (p - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, dA / denom, np.nan)
    z = np.zeros_like(dA)
    return np.where(np.isfinite(ratio) | (denom == 0), z, 1.0), z, z, ratio


_register("Ap_growth_constant", kind="sup")((_pair, _eval_ap_growth_constant))


def _eval_convexity(pts, params):
    x0, x1 = pts["xi0"], pts["xi1"]
    e0, e1 = energy_density(x0, params), energy_density(x1, params)
    mid = energy_density(0.5 * (x0 + x1), params)
    rhs = 0.5 * e0 + 0.5 * e1
    return mid, rhs, rhs, None


_register("convexity")((_pair, _eval_convexity))


# -- Hessian error (calibration) -----------------------------------------------------


def _sample_hessian_error(rng, count, N, n, rr, params):
    d = params.delta
    mu = sampling.log_uniform(rng, count, d * (1 + 1e-9), 10.0 * max(d, 1.0))
    r0 = rng.uniform(d + mu / 4, d + mu)
    x0 = r0[:, None, None] * sampling.directions(rng, count, N, n)
    # offsets spanning all scales up to the admissible ball |xi1| <= delta + mu
    step = (2.0 * (d + mu)) * sampling.log_uniform(rng, count, 1e-6, 1.0)
    x1 = x0 + step[:, None, None] * sampling.directions(rng, count, N, n)
    r1 = frob(x1)
    cap = d + mu
    x1 = np.where((r1 > cap)[:, None, None], x1 * (cap / r1)[:, None, None], x1)
    # half of the second points are drawn directly in the ball, log-uniform in
    # radius: the worst ratios sit where xi1 approaches the facet
    direct = rng.uniform(size=count) < 0.5
    rad = cap * sampling.log_uniform(rng, count, 1e-4, 1.0)
    x1d = rad[:, None, None] * sampling.directions(rng, count, N, n)
    x1 = np.where(direct[:, None, None], x1d, x1)
    return {"xi0": x0, "xi1": x1, "mu": mu}


def _eval_hessian_error(pts, params):
    x0, x1, mu = pts["xi0"], pts["xi1"], pts["mu"]
    d = x1 - x0
    B = hessian(x0, params)
    Bd = unflatten(np.einsum("...kl,...l->...k", B, flatten(d)), d.shape[-2], d.shape[-1])
    err = frob(Bd - (flux(x1, params) - flux(x0, params)))
    dx = frob(d)
    b0 = params.beta0
    denom = mu ** (params.p - 2 - b0) * dx ** (1 + b0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dx > 0, err / denom, np.nan)
    z = np.zeros_like(err)
    bad = ~np.isfinite(ratio) & (dx > 0)
    return bad.astype(float), z, z, ratio


_register("hessian_error", joint=True, kind="sup")((_sample_hessian_error, _eval_hessian_error))


# -- inverse of G_{p,eps} ------------------------------------------------------


def _eval_gp_inverse(pts, params):
    y = pts["xi"]
    x = gp_eps_inverse(y, params)
    ry = frob(y)
    err = frob(gp_eps_map(x, params) - y) / ry
    ratio = frob(x) / ry ** (1.0 / params.p)
    return err, np.full_like(err, 1e-10), np.zeros_like(err), ratio


_register("gp_inverse", kind="sup")((_single, _eval_gp_inverse))


# -- calculus consistency ----------------------------------------------------------

CALCULUS_RADIUS_RANGE = (1e-3, 1e3)


def _single_calculus(rng, count, N, n, rr, params):
    return {"xi": sampling.matrices(rng, count, N, n, CALCULUS_RADIUS_RANGE)}


def _fd_steps(xi, params):
    return 1e-5 * np.maximum(frob(xi), params.epsilon)


def _eval_flux_consistency(pts, params):
    xi = pts["xi"]
    v = flatten(xi)
    N, n = xi.shape[-2:]
    h = _fd_steps(xi, params)
    fd = np.empty_like(v)
    for k in range(v.shape[-1]):
        e = np.zeros_like(v)
        e[:, k] = h
        fp = energy_density(unflatten(v + e, N, n), params)
        fm = energy_density(unflatten(v - e, N, n), params)
        fd[:, k] = (fp - fm) / (2.0 * h)
    A = flatten(flux(xi, params))
    rel = np.linalg.norm(fd - A, axis=-1) / np.linalg.norm(A, axis=-1)
    return rel, np.full_like(rel, 1e-6), np.zeros_like(rel), rel


_register("flux_consistency", kind="sup")((_single_calculus, _eval_flux_consistency))


def _eval_hessian_consistency(pts, params):
    xi = pts["xi"]
    v = flatten(xi)
    N, n = xi.shape[-2:]
    h = _fd_steps(xi, params)
    K = v.shape[-1]
    fd = np.empty(v.shape + (K,))
    for k in range(K):
        e = np.zeros_like(v)
        e[:, k] = h
        fp = flatten(flux(unflatten(v + e, N, n), params))
        fm = flatten(flux(unflatten(v - e, N, n), params))
        fd[:, :, k] = (fp - fm) / (2.0 * h)[:, None]
    B = hessian(xi, params)
    rel = np.linalg.norm(fd - B, axis=(-2, -1)) / np.linalg.norm(B, axis=(-2, -1))
    return rel, np.full_like(rel, 1e-5), np.zeros_like(rel), rel


_register("hessian_consistency", kind="sup")((_single_calculus, _eval_hessian_consistency))


# -- g1 bounds ---------------------------------------------------------------------


def _sample_sigma(rng, count, N, n, rr, params):
    lo, hi = rr
    return {"sigma": sampling.log_uniform(rng, count, lo * lo, hi * hi)}


def _g1d(s, b, order):
    if order == 1:
        return b / np.sqrt(s)
    return -0.5 * b / (s * np.sqrt(s))


def _eval_g1_prime(pts, params):
    s = pts["sigma"]
    lhs = np.abs(_g1d(s, params.b, 1))
    rhs = params.b * s**-0.5
    return lhs, rhs, rhs, None


def _eval_g1_pprime(pts, params):
    s = pts["sigma"]
    lhs = np.abs(_g1d(s, params.b, 2))
    rhs = 0.5 * params.b * s**-1.5
    return lhs, rhs, rhs, None


def _sample_g1_holder(rng, count, N, n, rr, params):
    mu = sampling.log_uniform(rng, count, *rr)
    s1 = mu**2 * rng.uniform(0.25, 7.0, count)
    s2 = mu**2 * rng.uniform(0.25, 7.0, count)
    return {"mu": mu, "sigma1": s1, "sigma2": s2}


def _eval_g1_holder(pts, params):
    mu, s1, s2 = pts["mu"], pts["sigma1"], pts["sigma2"]
    a, c = _g1d(s1, params.b, 2), _g1d(s2, params.b, 2)
    lhs = np.abs(a - c)
    rhs = 24.0 * params.b * mu**-5.0 * np.abs(s1 - s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, 24.0 * lhs / rhs, np.nan)
    return lhs, rhs, np.abs(a) + np.abs(c), ratio


_register("g1_prime")((_sample_sigma, _eval_g1_prime))
_register("g1_pprime")((_sample_sigma, _eval_g1_pprime))
_register("g1_holder", kind="sup")((_sample_g1_holder, _eval_g1_holder))

G1_SUITE = ("g1_prime", "g1_pprime", "g1_holder")

#: inequalities that must hold exactly (zero violations) on every seed
CORRECTNESS_SUITE = (
    "G2delta_lipschitz",
    "Bp_sandwich",
    "B1_sandwich",
    "C_sandwich",
    "monotonicity",
    "A1_growth",
    "relaxation_proximity",
    "chain_bound",
    "boundedness_equivalence",
    "convexity",
    "flux_consistency",
    "hessian_consistency",
    "gp_inverse",
) + G1_SUITE


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------


def _zero_point(points):
    """Replace the first sample with the zero matrix (or skip if not matrix-valued)."""
    for k, v in points.items():
        if v.ndim == 3:
            v[0] = 0.0
    return points


def _evaluate_chunk(ineq, params, N, n, rr, count, rng, slack, zero_first, tighten):
    points = ineq.sample(rng, count, N, n, rr, params)
    if zero_first:
        points = _zero_point(points)
    return _score(ineq, params, N, n, points, slack, tighten)


def _score(ineq, params, N, n, points, slack, tighten=None):
    lhs, rhs, scale, ratio = ineq.evaluate(points, params)
    if tighten is not None:
        rhs = rhs * tighten
    if ineq.name in ("monotonicity", "Ap_monotonicity_constant"):
        tol = scale
    else:
        tol = slack * scale
    excess = lhs - rhs
    valid = np.isfinite(lhs) & np.isfinite(rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(scale > 0, (rhs - lhs) / scale, rhs - lhs)
    bad = valid & (excess > tol)
    res = InequalityResult(constant_kind=ineq.constant_kind)
    res.checked = int(valid.sum())
    res.skipped = int((~valid).sum())
    res.violations = int(bad.sum())
    if valid.any():
        res.worst_margin = float(np.min(margin[valid]))
    if ratio is not None:
        r = ratio[np.isfinite(ratio)]
        res.skipped += int(ratio.size - r.size) if ineq.constant_kind else 0
        if r.size:
            res.empirical_constant = float(r.min() if ineq.constant_kind == "inf" else r.max())
    for i in np.flatnonzero(bad)[:MAX_WITNESSES]:
        res.witnesses.append(
            {
                "inequality": ineq.name,
                "dims": [int(N), int(n)],
                "params": params.to_dict(),
                "point": {k: v[i].tolist() for k, v in points.items()},
                "lhs": float(lhs[i]),
                "rhs": float(rhs[i]),
                "tighten": tighten,
            }
        )
    return res


def replay_witness(witness):
    """Re-evaluate a reported violation on its own; returns ``(lhs, rhs)``."""
    ineq = REGISTRY[witness["inequality"]]
    params = ModelParams.from_dict(witness["params"])
    points = {k: np.asarray(v, dtype=float)[None] for k, v in witness["point"].items()}
    lhs, rhs, _, _ = ineq.evaluate(points, params)
    if witness.get("tighten") is not None:
        rhs = rhs * witness["tighten"]
    return float(lhs[0]), float(rhs[0])


def _workers(requested):
    cap = os.environ.get("FACETFLOW_THREADS")
    if cap:
        return max(1, min(requested, int(cap)))
    return max(1, requested)


def run_sweep(config, suite, tighten=None):
    """Evaluate every inequality in ``suite`` on ``config.samples`` draws per
    (dims, params) combination.

    ``tighten`` optionally maps an inequality id to a factor applied to its
    right-hand side; it exists to exercise the witness path.
    """
    config.validate()
    suite = list(dict.fromkeys(suite))
    if not suite:
        raise ValueError("no suites selected")
    unknown = [s for s in suite if s not in REGISTRY]
    if unknown:
        raise ValueError(f"unknown inequalities: {unknown}")
    for name in suite:
        if REGISTRY[name].joint:
            for params in config.param_grid:
                params.require_joint()
    tighten = tighten or {}

    tasks = []
    for si, name in enumerate(suite):
        ineq = REGISTRY[name]
        for di, (N, n) in enumerate(config.dims):
            for pi, params in enumerate(config.param_grid):
                left = int(config.samples)
                ci = 0
                while left > 0:
                    count = min(left, int(config.chunk))
                    tasks.append((name, si, di, pi, ci, N, n, params, count))
                    left -= count
                    ci += 1

    def run(task):
        name, si, di, pi, ci, N, n, params, count = task
        ineq = REGISTRY[name]
        rng = sampling.substream(config.seed, _stable_id(name), di, pi, ci)
        zero_first = ineq.include_zero and ci == 0
        return name, _evaluate_chunk(ineq, params, N, n, config.radius_range, count, rng,
                                     config.slack, zero_first, tighten.get(name))

    results = {name: InequalityResult(constant_kind=REGISTRY[name].constant_kind) for name in suite}
    workers = _workers(config.workers)
    if workers == 1:
        outs = map(run, tasks)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        outs = pool.map(run, tasks)
    for name, part in outs:
        results[name].merge(part)
    if workers > 1:
        pool.shutdown()
    return SweepReport(config=config, results=results)


def _stable_id(name):
    # process-independent integer key (str hash is salted per process)
    return int.from_bytes(name.encode()[:8].ljust(8, b"\0"), "little") ^ len(name)


def check_g1_bounds(config):
    """Growth and Hölder bounds of ``g1(s) = 2 b sqrt(s)`` on sampled ``s``."""
    return run_sweep(config, G1_SUITE)


def calibrate_constant(inequality_id, config):
    """Empirical supremum (or infimum) of the inequality's ratio over the sweep."""
    ineq = REGISTRY[inequality_id]
    if ineq.constant_kind is None:
        raise ValueError(f"{inequality_id} has no ratio form")
    return run_sweep(config, [inequality_id]).results[inequality_id].empirical_constant
