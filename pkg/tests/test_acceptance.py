"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from facetflow import cli, mesh, presets, regularity as R, sampling, verifier as V
from facetflow.density import C_DAGGER, ModelParams, flux
from facetflow.solver import DiscreteField, minimize, solve_ladder

import oracles

DIMS = [(1, 2), (2, 2), (3, 3)]


def failures(report):
    return {k: r.violations for k, r in report.results.items() if r.violations}


@pytest.fixture(scope="module")
def bingham_problem():
    return presets.build_problem({"preset": "bingham_disk"})


def test_criterion_01_g2delta_lipschitz(record):
    grid = [ModelParams(delta=0.5, epsilon=0.1), ModelParams(delta=0.2, epsilon=0.04)]
    t0 = time.perf_counter()
    rep = V.run_sweep(V.SweepConfig(seed=101, samples=1_000_000, dims=DIMS, param_grid=grid,
                                    slack=1e-9), ["G2delta_lipschitz"])
    dt = time.perf_counter() - t0
    res = rep.results["G2delta_lipschitz"]
    assert abs(C_DAGGER - oracles.C_DAGGER_EXACT) <= 4e-16
    ok = (res.violations == 0 and res.checked >= 6_000_000 and res.empirical_constant <= C_DAGGER
          and dt <= 60)
    record(1, ok, f"{res.checked} pairs, violations={res.violations}, "
                  f"max quotient={res.empirical_constant:.10f} <= c={C_DAGGER:.10f}, {dt:.1f}s")
    assert ok


def test_criterion_02_hessian_sandwiches(record):
    grid = [ModelParams(b=b, p=p, delta=0.5, epsilon=0.1) for p in (1.5, 2.0, 3.0)
            for b in (0.25, 1.0, 2.0)]
    for prm in grid:  # default structure constants of the model density
        assert prm.gamma == min(1.0, prm.p - 1.0) and prm.Gamma == max(1.0, abs(prm.p - 2.0) / 2)
    rep = V.run_sweep(V.SweepConfig(seed=202, samples=100_000, dims=DIMS, param_grid=grid,
                                    slack=1e-9), ["Bp_sandwich", "B1_sandwich"])
    ok = rep.passed and all(r.checked >= 100_000 * 27 for r in rep.results.values())
    record(2, ok, ", ".join(f"{k}: {r.checked} samples, violations={r.violations}"
                            for k, r in rep.results.items()))
    assert ok, failures(rep)


def test_criterion_03_calculus_consistency(record):
    grid = [ModelParams(b=b, p=p, epsilon=e) for e in (0.01, 0.1, 0.5) for p, b in ((1.5, 1.0), (3.0, 0.5))]
    rep = V.run_sweep(V.SweepConfig(seed=303, samples=1000, dims=DIMS, param_grid=grid),
                      ["flux_consistency", "hessian_consistency"])
    fl, he = rep.results["flux_consistency"], rep.results["hessian_consistency"]
    assert V.CALCULUS_RADIUS_RANGE == (1e-3, 1e3)
    ok = rep.passed and fl.empirical_constant <= 1e-6 and he.empirical_constant <= 1e-5
    record(3, ok, f"flux rel err max={fl.empirical_constant:.2e} (<=1e-6), "
                  f"hessian rel err max={he.empirical_constant:.2e} (<=1e-5), {fl.checked} samples each")
    assert ok, failures(rep)


def test_criterion_04_monotonicity(record):
    grid = [ModelParams(b=b, p=p, epsilon=0.1) for p in (1.5, 2.0, 3.0) for b in (0.0, 1.0)]
    rep = V.run_sweep(V.SweepConfig(seed=404, samples=1_000_000, dims=DIMS, param_grid=grid),
                      ["monotonicity"])
    res = rep.results["monotonicity"]
    # identity flux: the ratio against |xi1 - xi0|^2 is 1
    worst = 0.0
    prm = ModelParams(b=0.0, p=2.0, epsilon=0.1)
    for N, n in DIMS:
        rng = sampling.substream(405, N, n)
        x0, x1 = sampling.pairs(rng, 1_000_000, N, n, sampling.DEFAULT_RADIUS_RANGE)
        _, _, _, ratio = V.REGISTRY["monotonicity"].evaluate({"xi0": x0, "xi1": x1}, prm)
        worst = max(worst, float(np.nanmax(np.abs(ratio - 1.0))))
    ok = res.violations == 0 and worst <= 1e-12
    record(4, ok, f"{res.checked} pairs, violations={res.violations}; p=2,b=0 max|ratio-1|={worst:.1e}")
    assert ok


def test_criterion_05_truncation_proximity_and_chain(record):
    grid = [ModelParams(delta=0.5, epsilon=0.1), ModelParams(delta=0.2, epsilon=0.04)]
    rep = V.run_sweep(V.SweepConfig(seed=505, samples=1_000_000, dims=DIMS, param_grid=grid),
                      ["relaxation_proximity", "chain_bound"])
    prox = rep.results["relaxation_proximity"]
    ok = rep.passed and prox.empirical_constant <= 1.0 + 1e-9
    record(5, ok, ", ".join(f"{k}: {r.checked} samples, violations={r.violations}"
                            for k, r in rep.results.items())
           + f"; max |G_de - G_d|/eps={prox.empirical_constant:.6f}")
    assert ok, failures(rep)


def test_criterion_06_bingham_oracle(record, bingham_problem):
    m, field0, f, params, tol = bingham_problem
    assert params.epsilon == 0.00625 and params.b == 0.25 and params.p == 2.0
    # oracle targets: unrelaxed centre velocity and the radius where f r / 2 = b
    centre_target = float(oracles.bingham_exact(0.0))
    r0 = 2 * params.b / 1.0
    assert centre_target == 0.0625 and r0 == 0.5
    t0 = time.perf_counter()
    sol, rep = minimize(field0, f, params, tol)
    dt = time.perf_counter() - t0
    centre = float(sol.u[np.argmin(np.hypot(*m.vertices.T)), 0])
    rel = abs(centre - centre_target) / centre_target
    rhat = R.plug_radius(sol, params)
    layers = abs(rhat - r0) / m.h
    ok = rep.converged and rel <= 0.05 and layers <= 2.0 and dt <= 300
    record(6, ok, f"h={m.h:.4f}, centre={centre:.6f} ({100 * rel:.2f}% from 0.0625), "
                  f"plug radius={rhat:.4f} ({layers:.2f} layers from 0.5), {dt:.1f}s")
    assert ok


def test_criterion_07_ladder_cauchy(record, bingham_problem):
    m, field0, f, params, tol = bingham_problem
    cfg = presets.expand({"preset": "bingham_disk"})
    eps, delta = cfg["epsilons"], cfg["delta"]
    assert eps == [0.05, 0.025, 0.0125, 0.00625] and delta == 0.3
    rep = solve_ladder(field0, f, params, eps, delta, tol)
    sup = rep.sup_G_differences
    l2 = rep.l2_differences
    strictly = all(a > b for a, b in zip(sup, sup[1:]))
    factor = (l2[0] / l2[-1]) ** (1.0 / (len(l2) - 1))
    ok = not rep.errors and strictly and factor >= 1.3
    record(7, ok, f"sup|G_2d,e_j - G_2d,e_j+1| = {[float(f'{s:.3g}') for s in sup]} "
                  f"(strictly decreasing: {strictly}); L2 diffs {[float(f'{s:.3g}') for s in l2]}, "
                  f"mean factor {factor:.3f} (>=1.3)")
    assert ok


def test_criterion_08_refinement_stability(record):
    prm = ModelParams(b=0.25, p=2.0, delta=0.05, epsilon=0.00625)
    alphas, tables = [], []
    for cells in (128, 256):
        m = mesh.disk(1.0, cells)
        sol, _ = minimize(DiscreteField(m, np.zeros((m.n_vertices, 1))), 1.0, prm)
        fit = R.holder_seminorm(sol, prm.delta, prm, pair_budget=20000, seed=0)
        alphas.append(fit.alpha)
        for r in (0.1, 0.2):
            for x0 in R.default_centers(sol, 8, 0, r):
                tables.append((R.excess(sol, x0, r, "Phi", prm), R.excess(sol, x0, r, "Psi", prm)))
    change = abs(alphas[0] - alphas[1])
    nonneg = all(phi >= 0 and psi >= 0 for phi, psi in tables)
    # constant-gradient control run: affine data solved on a dyadic grid
    ctrl = mesh.rectangle(nx=16, ny=16)
    lin = presets.expand({"preset": "linear_boundary"})
    xi0 = np.asarray(lin["boundary"]["xi"], float)
    csol, crep = minimize(DiscreteField(ctrl, ctrl.vertices @ xi0.T), 0.0,
                          ModelParams.from_dict(lin["params"]))
    control = [R.excess(csol, x0, r, "Phi", prm) for r in (0.1, 0.2, 0.3)
               for x0 in R.default_centers(csol, 8, 0, r)]
    ok = change <= 0.1 and nonneg and crep.converged and all(v == 0.0 for v in control)
    record(8, ok, f"alpha(h)={alphas[0]:.4f}, alpha(h/2)={alphas[1]:.4f}, change={change:.4f} (<=0.1); "
                  f"{len(tables)} excess rows non-negative: {nonneg}; control Phi max={max(control)}")
    assert ok


def test_criterion_09_schedule_exactness(record):
    s = R.de_giorgi_schedule(0.8, 1.0, 0.6, 0.9, K=20)
    a_err = abs(s.alpha - (-math.log(0.6) / math.log(4.0)))
    rel = max(abs(mu - (rho / 0.8) ** s.alpha) / mu for _, rho, mu in s.rows)
    ok = a_err <= 1e-12 and rel <= 1e-12 and len(s.rows) == 21
    record(9, ok, f"alpha={s.alpha:.15f} (err {a_err:.1e}), max rel err of mu_k={rel:.1e} over k<=20")
    assert ok


def test_criterion_10_determinism(record, tmp_path):
    vcfg = tmp_path / "verify.json"
    vcfg.write_text(json.dumps(cli.verify_config_to_dict(V.SweepConfig(), V.CORRECTNESS_SUITE)))
    scfg = tmp_path / "solve.json"
    scfg.write_text(json.dumps({"preset": "bingham_disk"}))
    outs = []
    for k in range(2):
        v = tmp_path / f"verify_{k}"
        s = tmp_path / f"solve_{k}"
        assert cli.main(["verify", "--config", str(vcfg), "--out", str(v), "--deterministic"]) == 0
        assert cli.main(["solve", "--config", str(scfg), "--out", str(s), "--deterministic"]) == 0
        blobs = {f"verify/{p.name}": p.read_bytes() for p in v.glob("*.csv")}
        blobs.update({f"solve/{p.name}": p.read_bytes() for p in s.glob("*.csv")})
        outs.append(blobs)
        m1 = json.loads((v / "manifest.json").read_text())
        m2 = json.loads((s / "manifest.json").read_text())
        assert m1["deterministic"] and m2["deterministic"]
    same = outs[0] == outs[1]
    ok = same and len(outs[0]) >= 7
    record(10, ok, f"{len(outs[0])} CSV files byte-identical across reruns: {same}")
    assert ok
