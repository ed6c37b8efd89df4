"""P1 minimization of the relaxed functional and the epsilon ladder.

The discrete functional is

    F(u) = sum_T |T| E_eps(Du|_T) - sum_v m_v <f_v, u_v>

with ``m_v`` the lumped vertex masses.  It is minimized over fields with
prescribed values on boundary vertices by damped Newton steps (Hessian
solved with Jacobi-preconditioned CG) and Armijo backtracking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from . import _backend
from ._kernels_py import local_terms
from .density import (
    ModelParams,
    NonConvergence,
    _coefficients,
    energy_density,
    frob,
    truncate_relaxed,
)


class SingularLinearSolve(RuntimeError):
    """The assembled Newton matrix is not positive definite."""


class SolverNonConvergence(NonConvergence):
    def __init__(self, message, report=None, field=None):
        super().__init__(message)
        self.report = report
        self.field = field


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class DiscreteField:
    """Vertex values ``u`` (V, N) on a mesh; ``Du`` is derived, never stored."""

    def __init__(self, mesh, u):
        u = np.array(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if u.shape[0] != mesh.n_vertices:
            raise ValueError("u must have one row per vertex")
        self.mesh = mesh
        self.u = u

    @property
    def N(self):
        return self.u.shape[1]

    @property
    def Du(self):
        return element_gradients(self.mesh, self.u)

    def copy(self, u=None):
        return DiscreteField(self.mesh, self.u.copy() if u is None else u)

    @classmethod
    def from_function(cls, mesh, func, N=1):
        vals = np.asarray(func(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
        vals = vals.reshape(N, -1).T if vals.ndim > 1 or N > 1 else vals[:, None]
        return cls(mesh, vals)


def element_gradients(mesh, u):
    """Exact gradient (T, N, 2) of the piecewise-linear interpolant."""
    return np.einsum("tki,tka->tia", u[mesh.triangles], mesh.grads)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _element_terms(mesh, Du, params, want_hessian):
    if params.is_model:
        return _backend.kernels.element_terms(
            Du, mesh.grads, mesh.element_area, params.b, params.p, params.epsilon, want_hessian
        )
    s = np.sum(Du * Du, axis=(1, 2))
    energy = energy_density(Du, params)
    d1 = _coefficients(s, params, "total", 1)
    d2 = _coefficients(s, params, "total", 2) if want_hessian else None
    return local_terms(Du, mesh.grads, mesh.element_area, energy, d1, d2)


def _load(mesh, f, N):
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        f = np.full((mesh.n_vertices, N), float(f))
    elif f.ndim == 1:
        f = f[:, None] if N == 1 else np.broadcast_to(f, (mesh.n_vertices, N))
    return np.ascontiguousarray(f)


def assemble_energy(field, f, params):
    """``F(u)``: exact element energies minus the vertex-lumped load."""
    mesh = field.mesh
    f = _load(mesh, f, field.N)
    e, _, _ = _element_terms(mesh, field.Du, params, False)
    return float(e.sum() - np.sum(mesh.lumped_mass[:, None] * f * field.u))


def _scatter_gradient(mesh, lgrad, N):
    V = mesh.n_vertices
    idx = (mesh.triangles[:, :, None] * N + np.arange(N)).ravel()
    return np.bincount(idx, weights=lgrad.ravel(), minlength=V * N).reshape(V, N)


def assemble_gradient(field, f, params):
    """Nodal gradient of ``F``; interior rows are the discrete weak residual."""
    mesh = field.mesh
    f = _load(mesh, f, field.N)
    _, lgrad, _ = _element_terms(mesh, field.Du, params, False)
    return _scatter_gradient(mesh, lgrad, field.N) - mesh.lumped_mass[:, None] * f


def weak_residual(field, f, params):
    """Max over interior nodes and components of ``|dF/du_v| / m_v``."""
    g = assemble_gradient(field, f, params)
    free = ~field.mesh.boundary_mask
    if not free.any():
        return 0.0
    return float(np.max(np.abs(g[free]) / field.mesh.lumped_mass[free, None]))


def _assemble_system(field, f, params):
    mesh, N = field.mesh, field.N
    f = _load(mesh, f, N)
    e, lgrad, K = _element_terms(mesh, field.Du, params, True)
    grad = _scatter_gradient(mesh, lgrad, N) - mesh.lumped_mass[:, None] * f
    dof = (mesh.triangles[:, :, None] * N + np.arange(N)).reshape(len(mesh.triangles), -1)
    rows = np.repeat(dof, dof.shape[1], axis=1).ravel()
    cols = np.tile(dof, (1, dof.shape[1])).ravel()
    size = mesh.n_vertices * N
    H = sp.coo_matrix((K.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    energy = float(e.sum() - np.sum(mesh.lumped_mass[:, None] * f * field.u))
    return energy, grad, H


def _energy_change(mesh, u0, u1, f, params):
    """Accurate ``F(u1) - F(u0)``."""
    Du0 = element_gradients(mesh, u0)
    Du1 = element_gradients(mesh, u1)
    if params.is_model and (params.epsilon > 0 or np.all(np.sum(Du0 * Du0, axis=(1, 2)) > 0)):
        de = _backend.kernels.energy_change(Du0, Du1, params.b, params.p, params.epsilon)
    else:
        e0, _, _ = _element_terms(mesh, Du0, params, False)
        e1, _, _ = _element_terms(mesh, Du1, params, False)
        return float(e1.sum() - e0.sum() - np.sum(mesh.lumped_mass[:, None] * f * (u1 - u0)))
    return float(np.sum(mesh.element_area * de) - np.sum(mesh.lumped_mass[:, None] * f * (u1 - u0)))


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------


@dataclass
class ToleranceSpec:
    residual: float = 1e-10
    max_iters: int = 500
    energy_rel: float = 1e-14
    cg_rtol: float = 1e-12
    cg_maxiter: int = 20000
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    stall_iters: int = 3

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SolveReport:
    params: ModelParams
    energy_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    residual_norm: float = math.inf
    newton_iters: int = 0
    gradient_steps: int = 0
    linesearch_backtracks: int = 0
    cg_iters: int = 0
    converged: bool = False
    stop_reason: str = ""

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "energy_trace": list(self.energy_trace),
            "residual_trace": list(self.residual_trace),
            "residual_norm": self.residual_norm,
            "newton_iters": self.newton_iters,
            "gradient_steps": self.gradient_steps,
            "linesearch_backtracks": self.linesearch_backtracks,
            "cg_iters": self.cg_iters,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
        }


def _nodal_gradient(mesh, u, f, params, free):
    return assemble_gradient(DiscreteField(mesh, u), f, params).ravel()[free]


def _line_search(mesh, u, d, slope, f, params, tol, F=0.0, res=None, free=None, mass=None):
    """Armijo backtracking along ``d``; returns (step, energy change, backtracks).

    Near the minimum the predicted decrease falls below the rounding of the
    elementwise energy change.  There the change is taken as Simpson's rule
    for the integral of the nodal gradient along the step, and the full step
    is accepted if it decreases both that integral and the residual.
    """
    if res is not None and -slope <= 1e3 * np.finfo(float).eps * max(abs(F), 1.0):
        dv = d.ravel()[free]
        g_mid = _nodal_gradient(mesh, u + 0.5 * d, f, params, free)
        g_end = _nodal_gradient(mesh, u + d, f, params, free)
        dF = (slope + 4.0 * float(g_mid @ dv) + float(g_end @ dv)) / 6.0
        res1 = float(np.max(np.abs(g_end) / mass[free])) if g_end.size else 0.0
        if dF <= 0 and res1 < res:
            return 1.0, dF, 0
    t = 1.0
    for k in range(tol.max_backtracks + 1):
        dF = _energy_change(mesh, u, u + t * d, f, params)
        if dF <= tol.armijo * t * slope:
            return t, dF, k
        t *= tol.backtrack
    return None, 0.0, tol.max_backtracks


def minimize(field0, f, params, tol=None):
    """Minimize the relaxed functional with the boundary values of ``field0``.

    Returns ``(field, SolveReport)``; raises :class:`SolverNonConvergence`
    (carrying the report) after ``tol.max_iters`` iterations.
    """
    tol = tol or ToleranceSpec()
    if params.epsilon <= 0:
        raise ValueError("minimization needs epsilon > 0")
    mesh, N = field0.mesh, field0.N
    f = _load(mesh, f, N)
    free_v = ~mesh.boundary_mask
    free = np.repeat(free_v, N)
    u = field0.u.copy()
    report = SolveReport(params=params)
    F = assemble_energy(field0, f, params)
    report.energy_trace.append(F)
    mass = np.repeat(mesh.lumped_mass, N)
    stalled = 0

    for it in range(tol.max_iters + 1):
        cur = DiscreteField(mesh, u)
        _, grad, H = _assemble_system(cur, f, params)
        g = grad.ravel()[free]
        res = float(np.max(np.abs(g) / mass[free])) if g.size else 0.0
        report.residual_trace.append(res)
        report.residual_norm = res
        if res <= tol.residual:
            report.converged, report.stop_reason = True, "residual"
            break
        if it == tol.max_iters:
            report.stop_reason = "max_iters"
            raise SolverNonConvergence(
                f"no convergence in {tol.max_iters} iterations (residual {res:.3e})",
                report, DiscreteField(mesh, u),
            )
        Hff = H[free][:, free]
        diag = Hff.diagonal()
        if np.any(~np.isfinite(diag)) or np.any(diag <= 0):
            raise SingularLinearSolve("Newton matrix has a non-positive diagonal")
        M = LinearOperator(Hff.shape, matvec=lambda x: x / diag, dtype=float)
        count = [0]

        def _cb(_):
            count[0] += 1

        d, info = cg(Hff, -g, rtol=tol.cg_rtol, atol=0.0, maxiter=tol.cg_maxiter, M=M, callback=_cb)
        report.cg_iters += count[0]
        if info < 0 or not np.all(np.isfinite(d)):
            raise SingularLinearSolve("conjugate gradients broke down")
        slope = float(g @ d)
        step = None
        if slope < 0:
            full = np.zeros(u.size)
            full[free] = d
            full = full.reshape(u.shape)
            step, dF, bt = _line_search(
                mesh, u, full, slope, f, params, tol, F, res, free, mass)
            report.linesearch_backtracks += bt
        if step is None:
            # steepest descent in the lumped-mass metric
            d = -g / mass[free]
            slope = float(g @ d)
            full = np.zeros(u.size)
            full[free] = d
            full = full.reshape(u.shape)
            step, dF, bt = _line_search(mesh, u, full, slope, f, params, tol)
            report.linesearch_backtracks += bt
            report.gradient_steps += 1
            if step is None:
                report.stop_reason = "line_search_failed"
                raise SolverNonConvergence(
                    f"line search failed (residual {res:.3e})", report, DiscreteField(mesh, u)
                )
        else:
            report.newton_iters += 1
        u = u + step * full
        F = F + dF
        report.energy_trace.append(F)
        stalled = stalled + 1 if -dF < tol.energy_rel * abs(F) else 0
        if stalled >= tol.stall_iters:
            cur = DiscreteField(mesh, u)
            report.residual_norm = weak_residual(cur, f, params)
            report.residual_trace.append(report.residual_norm)
            report.converged = True
            report.stop_reason = "energy_stagnation"
            break
    return DiscreteField(mesh, u), report


# ---------------------------------------------------------------------------
# epsilon ladder
# ---------------------------------------------------------------------------


@dataclass
class LadderReport:
    epsilons: list
    delta: float
    levels: list  # SolveReport or None per level
    fields: list
    lp_differences: list = field(default_factory=list)
    l2_differences: list = field(default_factory=list)
    sup_G_differences: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_dict(self):
        return {
            "epsilons": list(self.epsilons),
            "delta": self.delta,
            "levels": [r.to_dict() if r is not None else None for r in self.levels],
            "lp_differences": self.lp_differences,
            "l2_differences": self.l2_differences,
            "sup_G_differences": self.sup_G_differences,
            "errors": self.errors,
        }


def lp_norm(mesh, W, p):
    """Discrete ``L^p`` norm of an element-wise matrix field."""
    return float(np.sum(mesh.element_area * frob(W) ** p) ** (1.0 / p))


def solve_ladder(field0, f, params_base, epsilons, delta, tol=None):
    """Solve for each ``epsilon`` in turn, warm-starting from the previous level."""
    epsilons = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    levels = [params_base.with_(epsilon=e, delta=delta) for e in epsilons]
    for prm in levels:
        prm.require_joint()
    mesh = field0.mesh
    rep = LadderReport(epsilons, float(delta), [], [])
    current = field0
    for j, prm in enumerate(levels):
        try:
            sol, sr = minimize(current, f, prm, tol)
        except SolverNonConvergence as exc:
            rep.errors.append({"level": j, "message": str(exc)})
            rep.levels.append(exc.report)
            rep.fields.append(None)
            continue
        rep.levels.append(sr)
        rep.fields.append(sol)
        current = sol
    p = params_base.p
    for j in range(len(levels) - 1):
        a, b = rep.fields[j], rep.fields[j + 1]
        if a is None or b is None:
            for lst in (rep.lp_differences, rep.l2_differences, rep.sup_G_differences):
                lst.append(None)
            continue
        dD = a.Du - b.Du
        rep.lp_differences.append(lp_norm(mesh, dD, p))
        rep.l2_differences.append(lp_norm(mesh, dD, 2.0))
        Ga = truncate_relaxed(a.Du, 2.0 * delta, epsilons[j])
        Gb = truncate_relaxed(b.Du, 2.0 * delta, epsilons[j + 1])
        rep.sup_G_differences.append(float(np.max(frob(Ga - Gb))))
    return rep
