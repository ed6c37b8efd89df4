"""Relaxed energy densities, fluxes, Hessians and truncation maps.

All maps act on N x n real matrices and broadcast over leading axes, so a
stack of gradients with shape ``(..., N, n)`` is evaluated in one call.
Matrix norms are Frobenius norms.  When a matrix is identified with a
vector of length ``N*n`` the ordering is column by column
(``xi[:, 0], xi[:, 1], ...``), see :func:`flatten`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

__all__ = [
    "C_DAGGER",
    "DomainError",
    "NonConvergence",
    "PowerDensity",
    "CustomDensity",
    "ModelParams",
    "flatten",
    "unflatten",
    "frob",
    "eval_g",
    "energy_density",
    "flux",
    "hessian",
    "hessian_eigenvalues",
    "coefficient_matrix_C",
    "ellipticity_ratio",
    "ellipticity_bound",
    "truncate",
    "truncate_relaxed",
    "gp_eps_map",
    "gp_eps_inverse",
    "subdifferential_contains",
    "check_structure",
    "model_holder_constant",
]

#: Lipschitz constant of the doubled relaxed truncation map.
C_DAGGER = 1.0 + 32.0 / (3.0 * math.sqrt(7.0))


class DomainError(ValueError):
    """Evaluation requested at a point where the map is singular."""


class NonConvergence(RuntimeError):
    """An iterative solve exhausted its iteration budget."""


# ---------------------------------------------------------------------------
# densities g_p
# ---------------------------------------------------------------------------


class PowerDensity:
    """The model density ``g_p(s) = 2 s^(p/2) / p``."""

    def __init__(self, p):
        self.p = float(p)

    def __call__(self, s, order=0):
        s = np.asarray(s, dtype=float)
        q = 0.5 * self.p
        if order == 0:
            return s**q / q
        if order == 1:
            return _safe_power(s, q - 1.0)
        if order == 2:
            if q == 1.0:
                return np.zeros_like(s)
            return (q - 1.0) * _safe_power(s, q - 2.0)
        raise ValueError(f"order must be 0, 1 or 2, got {order}")

    def singular_at_zero(self, order):
        return order >= 1 and 0.5 * self.p - order < 0 and not (order == 2 and self.p == 2)

    def __repr__(self):
        return f"PowerDensity(p={self.p:g})"


class CustomDensity:
    """User supplied ``(g, g', g'')`` triple.

    The callables must accept numpy arrays.  Use :func:`check_structure`
    to validate the growth and ellipticity conditions by sampling before
    trusting results obtained with it.
    """

    def __init__(self, g, dg, ddg, name="custom"):
        self._fns = (g, dg, ddg)
        self.name = name

    def __call__(self, s, order=0):
        return np.asarray(self._fns[order](np.asarray(s, dtype=float)), dtype=float)

    def singular_at_zero(self, order):
        if order == 0:
            return False
        with np.errstate(all="ignore"):
            return not np.isfinite(self(np.zeros(1), order)).all()

    def __repr__(self):
        return f"CustomDensity({self.name!r})"


def _safe_power(s, e):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.power(s, e)


def model_holder_constant(p):
    """Constant for which the model ``g_p''`` is Lipschitz (beta0 = 1) on
    ``[mu^2/4, 7 mu^2]`` after scaling by ``mu^(p-6)``."""
    third = abs((p - 2.0) * (p - 4.0)) / 4.0
    e = p / 2.0 - 3.0
    return third * max(0.25**e, 7.0**e)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Structure constants ``(b, p, gamma, Gamma, beta0, delta, epsilon)``.

    ``gamma`` and ``Gamma`` default to the values valid for the model
    density, ``min(1, p-1)`` and ``max(1, |p-2|/2)``.
    """

    b: float = 1.0
    p: float = 2.0
    gamma: float | None = None
    Gamma: float | None = None
    beta0: float = 1.0
    delta: float = 0.5
    epsilon: float = 0.0
    density: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", min(1.0, self.p - 1.0))
        if self.Gamma is None:
            object.__setattr__(self, "Gamma", max(1.0, abs(self.p - 2.0) / 2.0))
        for name in ("b", "p", "gamma", "Gamma", "beta0", "delta", "epsilon"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.b < 0:
            raise ValueError(f"b must be non-negative, got {self.b}")
        if self.p <= 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not 0 < self.gamma <= self.Gamma:
            raise ValueError("structure constants need 0 < gamma <= Gamma")
        if not 0 < self.beta0 <= 1:
            raise ValueError("beta0 must lie in (0, 1]")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    @property
    def gp(self):
        return self.density if self.density is not None else PowerDensity(self.p)

    @property
    def is_model(self):
        return self.density is None

    def require_joint(self):
        """Check the joint regime 0<delta<1, 0<epsilon<delta/4."""
        if not (0 < self.epsilon < self.delta / 4.0):
            raise ValueError(
                f"delta={self.delta:g}, epsilon={self.epsilon:g} violate 0<ε<δ/4"
            )
        return self

    def with_(self, **changes):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        # derived constants follow p unless set explicitly
        if "p" in changes and "gamma" not in changes and self.is_model:
            kw["gamma"] = None
            kw["Gamma"] = None
        kw.update(changes)
        return ModelParams(**kw)

    def to_dict(self):
        if not self.is_model:
            raise ValueError("custom densities cannot be serialized")
        return {
            "b": self.b,
            "p": self.p,
            "gamma": self.gamma,
            "Gamma": self.Gamma,
            "beta0": self.beta0,
            "delta": self.delta,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"b", "p", "gamma", "Gamma", "beta0", "delta", "epsilon"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown parameter keys: {sorted(extra)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# matrix helpers
# ---------------------------------------------------------------------------


def flatten(xi):
    """Column-major flattening ``(..., N, n) -> (..., N*n)``."""
    xi = np.asarray(xi, dtype=float)
    return np.swapaxes(xi, -1, -2).reshape(xi.shape[:-2] + (-1,))


def unflatten(v, N, n):
    v = np.asarray(v, dtype=float)
    return np.swapaxes(v.reshape(v.shape[:-1] + (n, N)), -1, -2)


def frob(xi):
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(np.sum(xi * xi, axis=(-2, -1)))


def _sq(xi):
    return np.sum(xi * xi, axis=(-2, -1))


# ---------------------------------------------------------------------------
# scalar functions g
# ---------------------------------------------------------------------------

_BRANCHES = ("g1", "gp", "g1_eps", "gp_eps", "g_eps")


def _g1(s, b, order):
    if order == 0:
        return 2.0 * b * np.sqrt(s)
    with np.errstate(divide="ignore"):
        if order == 1:
            return b / np.sqrt(s)
        return -0.5 * b / (s * np.sqrt(s))


def eval_g(sigma, which, order, params):
    """Evaluate ``g(sigma)`` or one of its first two derivatives.

    ``which`` selects the one-Laplacian part ``g1 = 2 b sqrt(s)``, the
    p-part ``gp``, their relaxed shifts ``g1_eps(s) = g1(eps^2 + s)``,
    ``gp_eps(s) = gp(eps^2 + s)``, or the sum ``g_eps``.
    """
    if which not in _BRANCHES:
        raise ValueError(f"unknown branch {which!r}")
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise DomainError("sigma must be non-negative")
    if which == "g_eps":
        return eval_g(sigma, "g1_eps", order, params) + eval_g(sigma, "gp_eps", order, params)
    s = sigma + params.epsilon**2 if which.endswith("_eps") else sigma
    at_zero = np.any(s == 0)
    if which.startswith("g1"):
        if order >= 1 and at_zero and params.b != 0:
            raise DomainError(f"{which}^({order}) is singular at 0 (sqrt)")
        if params.b == 0:
            return np.zeros_like(s)
        return _g1(s, params.b, order)
    gp = params.gp
    if at_zero and gp.singular_at_zero(order):
        raise DomainError(f"{which}^({order}) is singular at 0")
    return gp(s, order)


def _coefficients(s, params, branch, order):
    """``g_{branch,eps}^{(order)}(s)`` for ``s = |xi|^2``; zero where singular."""
    sig = params.epsilon**2 + s
    out = np.zeros_like(sig)
    if branch in ("1", "total") and params.b != 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out + _g1(sig, params.b, order)
    if branch in ("p", "total"):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out + params.gp(sig, order)
    return out


# ---------------------------------------------------------------------------
# energy, flux, Hessian
# ---------------------------------------------------------------------------


def energy_density(xi, params):
    """``E_eps(xi) = g_eps(|xi|^2) / 2``."""
    s = _sq(np.asarray(xi, dtype=float))
    sig = params.epsilon**2 + s
    return 0.5 * (2.0 * params.b * np.sqrt(sig) + params.gp(sig, 0))


def flux(xi, params, branch="total"):
    """``A_eps(xi) = g_eps'(|xi|^2) xi``; the limit map with ``A(0) = 0`` when eps = 0.

    ``branch`` is ``"total"``, ``"1"`` (one-Laplacian part) or ``"p"``.
    """
    xi = np.asarray(xi, dtype=float)
    s = _sq(xi)
    c = _coefficients(s, params, branch, 1)
    if params.epsilon == 0:
        c = np.where(s == 0, 0.0, c)
    return c[..., None, None] * xi


def hessian_eigenvalues(xi, params, branch="total"):
    """Radial eigenvalues ``(lam1, lam2)`` of ``B_eps(xi)``.

    ``lam1 = g'(eps^2+|xi|^2)`` has multiplicity ``N*n - 1`` (directions
    orthogonal to ``xi``); ``lam2 = lam1 + 2|xi|^2 g''(eps^2+|xi|^2)`` belongs
    to ``span(xi)``.
    """
    xi = np.asarray(xi, dtype=float)
    s = _sq(xi)
    sig = params.epsilon**2 + s
    if np.any(sig == 0):
        raise DomainError("Hessian undefined at xi = 0 when epsilon = 0")
    lam1 = np.zeros_like(sig)
    lam2 = np.zeros_like(sig)
    if branch in ("1", "total") and params.b != 0:
        root = np.sqrt(sig)
        one = params.b / root
        lam1 = lam1 + one
        # 1 - s/sig = eps^2/sig, written without cancellation
        lam2 = lam2 + one * (params.epsilon**2 / sig)
    if branch in ("p", "total"):
        d1 = params.gp(sig, 1)
        lam1 = lam1 + d1
        lam2 = lam2 + d1 + 2.0 * s * params.gp(sig, 2)
    return lam1, lam2


def hessian(xi, params, branch="total"):
    """``B_eps(xi) = g_eps'(|xi|^2) id + 2 g_eps''(|xi|^2) xi (x) xi`` as ``(..., Nn, Nn)``."""
    xi = np.asarray(xi, dtype=float)
    s = _sq(xi)
    if np.any(params.epsilon**2 + s == 0):
        raise DomainError("Hessian undefined at xi = 0 when epsilon = 0")
    d1 = _coefficients(s, params, branch, 1)
    d2 = _coefficients(s, params, branch, 2)
    v = flatten(xi)
    k = v.shape[-1]
    eye = np.eye(k)
    return d1[..., None, None] * eye + 2.0 * d2[..., None, None] * (v[..., :, None] * v[..., None, :])


def coefficient_matrix_C(Du, params):
    """n x n matrix ``g_eps' id_n + 2 g_eps'' sum_i grad u^i (x) grad u^i``."""
    Du = np.asarray(Du, dtype=float)
    s = _sq(Du)
    if np.any(params.epsilon**2 + s == 0):
        raise DomainError("coefficients undefined at Du = 0 when epsilon = 0")
    d1 = _coefficients(s, params, "total", 1)
    d2 = _coefficients(s, params, "total", 2)
    n = Du.shape[-1]
    gram = np.swapaxes(Du, -1, -2) @ Du
    return d1[..., None, None] * np.eye(n) + 2.0 * d2[..., None, None] * gram


def ellipticity_ratio(xi, params):
    """Largest over smallest eigenvalue of ``B_eps(xi)``."""
    lam1, lam2 = hessian_eigenvalues(xi, params)
    lo = np.minimum(lam1, lam2)
    hi = np.maximum(lam1, lam2)
    if np.any(lo <= 1e-14 * hi):
        raise DomainError("Hessian is not positive definite")
    return hi / lo


def ellipticity_bound(delta, params):
    """``R(delta) = (1 + b delta^(1-p)) / (p - 1)``."""
    return (1.0 + params.b * delta ** (1.0 - params.p)) / (params.p - 1.0)


# ---------------------------------------------------------------------------
# truncations
# ---------------------------------------------------------------------------


def _radial(xi, modulus, delta):
    """``(modulus - delta)_+ xi/|xi|`` with the value 0 at ``xi = 0``."""
    r = frob(xi)
    scale = np.divide(
        np.maximum(modulus - delta, 0.0), r, out=np.zeros_like(r), where=r > 0
    )
    return scale[..., None, None] * xi


def truncate(xi, delta):
    """``G_delta(xi) = (|xi| - delta)_+ xi/|xi|``."""
    xi = np.asarray(xi, dtype=float)
    return _radial(xi, frob(xi), delta)


def truncate_relaxed(xi, delta, epsilon):
    """``G_{delta,eps}(xi) = (sqrt(eps^2 + |xi|^2) - delta)_+ xi/|xi|``, needs ``eps < delta``."""
    if not 0 <= epsilon < delta:
        raise ValueError(f"relaxed truncation needs 0 <= epsilon < delta (got {epsilon}, {delta})")
    xi = np.asarray(xi, dtype=float)
    return _radial(xi, np.sqrt(epsilon**2 + _sq(xi)), delta)


def gp_eps_map(xi, params):
    """``G_{p,eps}(xi) = (eps^2 + |xi|^2)^((p-1)/2) xi``."""
    xi = np.asarray(xi, dtype=float)
    sig = params.epsilon**2 + _sq(xi)
    return (sig ** (0.5 * (params.p - 1.0)))[..., None, None] * xi


def _radial_inverse(t, p, eps, rtol=1e-12, max_iter=200):
    """Solve ``(eps^2 + r^2)^((p-1)/2) r = t`` for r >= 0, elementwise.

    Newton iterations kept inside a shrinking bisection bracket
    ``[0, t^(1/p)]``; the left side is strictly increasing in r.
    """
    shape = np.shape(t)
    t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    e = 0.5 * (p - 1.0)
    lo = np.zeros_like(t)
    hi = t ** (1.0 / p)
    r = hi.copy()
    done = t == 0
    r[done] = 0.0
    for _ in range(max_iter):
        if done.all():
            return r.reshape(shape)
        sig = eps * eps + r * r
        phi = sig**e * r - t
        dphi = sig ** (e - 1.0) * (sig + 2.0 * e * r * r)
        lo = np.where(phi < 0, r, lo)
        hi = np.where(phi > 0, r, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = r - phi / dphi
        bad = ~np.isfinite(step) | (step < lo) | (step > hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        new = np.where(phi == 0, r, new)
        conv = (np.abs(new - r) <= rtol * np.abs(new)) | (phi == 0)
        r = np.where(done, r, new)
        done = done | conv
    if not done.all():
        raise NonConvergence("radial inverse did not converge in 200 iterations")
    return r


def gp_eps_inverse(y, params):
    """Inverse of :func:`gp_eps_map`; acts radially, so only a scalar root is solved."""
    y = np.asarray(y, dtype=float)
    t = frob(y)
    r = _radial_inverse(t, params.p, params.epsilon)
    scale = np.divide(r, t, out=np.zeros_like(t), where=t > 0)
    return scale[..., None, None] * y


def subdifferential_contains(xi0, zeta, tol=1e-12):
    """Membership of ``zeta`` in the subdifferential of the norm at ``xi0``."""
    xi0 = np.asarray(xi0, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    r = frob(xi0)
    if r == 0:
        return bool(frob(zeta) <= 1.0 + tol)
    return bool(frob(zeta - xi0 / r) <= tol)


# ---------------------------------------------------------------------------
# structure conditions for pluggable densities
# ---------------------------------------------------------------------------


def check_structure(density, p, gamma, Gamma, beta0=1.0, samples=20000, seed=0,
                    holder_constant=None):
    """Sample the growth, ellipticity and Hölder conditions for a density.

    Returns a dict mapping condition name to the number of violating
    samples (relative slack 1e-9).  ``holder_constant`` overrides
    ``Gamma`` in the Hölder condition.
    """
    rng = np.random.default_rng(seed)
    slack = 1e-9
    s = 10.0 ** rng.uniform(-6, 6, samples)
    tau = rng.uniform(0, 1, samples)
    out = {}
    d1 = density(s, 1)
    d2 = density(s, 2)
    bound1 = Gamma * s ** (p / 2 - 1)
    bound2 = Gamma * s ** (p / 2 - 2)
    out["growth_prime"] = int(np.sum(np.abs(d1) > bound1 * (1 + slack)))
    out["growth_pprime"] = int(np.sum(np.abs(d2) > bound2 * (1 + slack)))
    st = s + tau
    ell = density(st, 1) + 2 * s * np.minimum(density(st, 2), 0.0)
    lower = gamma * st ** (p / 2 - 1)
    out["ellipticity"] = int(np.sum(ell < lower * (1 - slack)))
    mu = 10.0 ** rng.uniform(-3, 3, samples)
    s1 = mu**2 * rng.uniform(0.25, 7.0, samples)
    s2 = mu**2 * rng.uniform(0.25, 7.0, samples)
    hc = Gamma if holder_constant is None else holder_constant
    lhs = np.abs(density(s1, 2) - density(s2, 2))
    rhs = hc * mu ** (p - 4 - 2 * beta0) * np.abs(s1 - s2) ** beta0
    scale = np.abs(density(s1, 2)) + np.abs(density(s2, 2))
    out["holder_pprime"] = int(np.sum(lhs - rhs > slack * scale))
    return out
