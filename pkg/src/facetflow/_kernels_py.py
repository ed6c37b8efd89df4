"""Pure numpy versions of the hot kernels.

Signatures mirror the compiled ``_kernels`` extension exactly; the
backend module picks one of the two at import time.  All kernels use the
model density ``g_p(s) = 2 s^(p/2)/p``.
"""
import numpy as np


def _model_coefficients(sig, b, p, want_second):
    root = np.sqrt(sig)
    q = 0.5 * p
    d1 = b / root + sig ** (q - 1.0)
    if not want_second:
        return d1, None
    d2 = -0.5 * b / (sig * root)
    if q != 1.0:
        d2 = d2 + (q - 1.0) * sig ** (q - 2.0)
    return d1, d2


def local_terms(Du, grads, area, energy, d1, d2):
    """Element energies, load-free local gradients and local Hessians.

    ``Du`` is (T, N, 2), ``grads`` the barycentric gradients (T, 3, 2).
    ``energy``, ``d1``, ``d2`` are per-element ``E``, ``g'`` and ``g''``
    (``d2`` may be None to skip the Hessian).  Local Hessians have shape
    (T, 3N, 3N) with local dof ``a*N + i``.
    """
    T, N, _ = Du.shape
    flux = d1[:, None, None] * Du
    lgrad = area[:, None, None] * np.einsum("tia,tka->tki", flux, grads)
    if d2 is None:
        return area * energy, lgrad, None
    gram = np.einsum("tka,tla->tkl", grads, grads)
    w = np.einsum("tia,tka->tki", Du, grads)
    K = (d1 * area)[:, None, None, None, None] * (
        gram[:, :, None, :, None] * np.eye(N)[None, None, :, None, :]
    )
    K = K + (2.0 * d2 * area)[:, None, None, None, None] * (
        w[:, :, :, None, None] * w[:, None, None, :, :]
    )
    return area * energy, lgrad, K.reshape(T, 3 * N, 3 * N)


def element_terms(Du, grads, area, b, p, eps, want_hessian):
    Du = np.ascontiguousarray(Du, dtype=float)
    s = np.sum(Du * Du, axis=(1, 2))
    sig = eps * eps + s
    energy = b * np.sqrt(sig) + sig ** (0.5 * p) / p
    d1, d2 = _model_coefficients(sig, b, p, want_hessian)
    return local_terms(Du, grads, area, energy, d1, d2)


def energy_change(Du0, Du1, b, p, eps):
    """Per-element ``E(Du1) - E(Du0)`` without catastrophic cancellation.

    Needs ``eps > 0`` (or nonzero gradients) so that ``eps^2 + |Du0|^2 > 0``.
    """
    ds = np.sum((Du1 - Du0) * (Du1 + Du0), axis=(1, 2))
    sig0 = eps * eps + np.sum(Du0 * Du0, axis=(1, 2))
    sig1 = sig0 + ds
    one = b * ds / (np.sqrt(sig1) + np.sqrt(sig0))
    q = 0.5 * p
    two = sig0**q * np.expm1(q * np.log1p(ds / sig0)) / p
    return one + two


def truncation_quotients(x1, x2, delta, eps):
    """``|G(x1) - G(x2)|`` and ``|x1 - x2|`` for the relaxed truncation
    ``G = G_{delta,eps}`` on flattened rows of shape (M, K)."""
    def g(x):
        r2 = np.sum(x * x, axis=1)
        r = np.sqrt(r2)
        m = np.maximum(np.sqrt(eps * eps + r2) - delta, 0.0)
        scale = np.divide(m, r, out=np.zeros_like(r), where=r > 0)
        return scale[:, None] * x

    dg = g(x1) - g(x2)
    dx = x1 - x2
    return np.sqrt(np.sum(dg * dg, axis=1)), np.sqrt(np.sum(dx * dx, axis=1))
