"""``facetflow verify|solve|ladder|regularity``."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import presets, regularity, store, verifier
from .density import ModelParams
from .solver import DiscreteField, SolverNonConvergence, minimize, solve_ladder

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATIONS, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def verify_config_from_dict(d):
    """``(SweepConfig, suites)`` from a verify config document."""
    d = dict(d)
    suites = d.pop("suites", list(verifier.CORRECTNESS_SUITE))
    d.pop("workers", None)
    return verifier.SweepConfig.from_dict(d), list(suites)


def verify_config_to_dict(config, suites):
    out = config.to_dict()
    out["suites"] = list(suites)
    return out


def _read_config(path):
    if path is None:
        return {}
    try:
        return store.load_json(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _out_dir(args, default_name):
    if args.out:
        out = args.out
    elif args.config:
        out = os.path.join(os.path.dirname(os.path.abspath(args.config)), default_name)
    else:
        out = os.path.abspath(default_name)
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_verify(args):
    raw = _read_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        config, suites = verify_config_from_dict(raw)
        config.validate()
        if not suites:
            raise ConfigError("no suites selected")
        if args.deterministic:
            config.workers = 1
        else:
            config.workers = max(1, os.cpu_count() or 1)
        report = verifier.run_sweep(config, suites)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    out = args.out or (os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd())
    os.makedirs(out, exist_ok=True)
    jpath = os.path.join(out, "sweep_report.json")
    cpath = os.path.join(out, "sweep_report.csv")
    with open(jpath, "w") as fh:
        fh.write(report.to_json() + "\n")
    with open(cpath, "w") as fh:
        fh.write(report.to_csv())
    doc = verify_config_to_dict(config, suites)
    store.write_manifest(out, "verify", doc, config.seed,
                         [p.to_dict() for p in config.param_grid], None, [jpath, cpath],
                         args.deterministic)
    for name, res in report.results.items():
        print(f"{name:28s} checked={res.checked:<9d} violations={res.violations}")
    print(f"status: {report.status}")
    return EXIT_OK if report.passed else EXIT_VIOLATIONS


def _problem(args):
    raw = _read_config(args.config)
    if not raw:
        raise ConfigError("solve/ladder need a config with a preset or mesh/params")
    base = os.path.dirname(os.path.abspath(args.config))
    try:
        cfg = presets.expand(raw)
        mesh, field0, f, params, tol = presets.build_problem(cfg, base)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, mesh, field0, f, params, tol


def _solution_summary(field, f, params):
    r = np.hypot(*field.mesh.vertices.T)
    mask, frac = regularity.facet_mask(field, 1e-3 * float(np.max(np.abs(field.Du))))
    return {
        "max_u": float(np.max(field.u)),
        "min_u": float(np.min(field.u)),
        "u_at_origin_vertex": field.u[int(np.argmin(r))].tolist(),
        "plug_radius": regularity.plug_radius(field, params),
        "facet_fraction": frac,
        "max_abs_Du": float(np.max(np.sqrt(np.sum(field.Du**2, axis=(1, 2))))),
    }, mask


def cmd_solve(args):
    cfg, mesh, field0, f, params, tol = _problem(args)
    try:
        params.require_joint()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args, "solve_run")
    outputs = []
    cpath = os.path.join(out, "config.json")
    store.dump_json(cfg, cpath)
    outputs.append(cpath)
    outputs += store.write_mesh(mesh, out)
    fpath = os.path.join(out, "load.csv")
    store.write_table(fpath, [f"f{i}" for i in range(f.shape[1])], f)
    outputs.append(fpath)
    code = EXIT_OK
    try:
        sol, rep = minimize(field0, f, params, tol)
    except SolverNonConvergence as exc:
        sol, rep, code = exc.field, exc.report, EXIT_NONCONVERGENCE
        print(f"solver did not converge: {exc}", file=sys.stderr)
    rpath = os.path.join(out, "solve_report.json")
    store.dump_json(rep.to_dict(), rpath)
    outputs.append(rpath)
    if sol is not None:
        outputs += store.write_field(sol, out)
        summary, mask = _solution_summary(sol, f, params)
        mpath = os.path.join(out, "facet_mask.csv")
        store.write_table(mpath, ["facet"], ([int(m)] for m in mask))
        spath = os.path.join(out, "summary.json")
        store.dump_json(summary, spath)
        outputs += [mpath, spath]
    store.write_manifest(out, "solve", cfg, None, params.to_dict(), cfg["mesh"], outputs,
                         args.deterministic)
    print(f"solve: converged={rep.converged} residual={rep.residual_norm:.3e} -> {out}")
    return code


def cmd_ladder(args):
    cfg, mesh, field0, f, params, tol = _problem(args)
    eps = cfg.get("epsilons")
    delta = cfg.get("delta", params.delta)
    if not eps:
        raise ConfigError("ladder config needs 'epsilons'")
    out = _out_dir(args, "ladder_run")
    try:
        rep = solve_ladder(field0, f, params, eps, delta, tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    outputs = []
    cpath = os.path.join(out, "config.json")
    store.dump_json(cfg, cpath)
    outputs.append(cpath)
    outputs += store.write_mesh(mesh, out)
    fpath = os.path.join(out, "load.csv")
    store.write_table(fpath, [f"f{i}" for i in range(f.shape[1])], f)
    outputs.append(fpath)
    for j, (sr, sol) in enumerate(zip(rep.levels, rep.fields)):
        sub = os.path.join(out, f"level_{j:02d}")
        os.makedirs(sub, exist_ok=True)
        rp = os.path.join(sub, "solve_report.json")
        store.dump_json(sr.to_dict(), rp)
        outputs.append(rp)
        if sol is not None:
            outputs += store.write_field(sol, sub)
    lpath = os.path.join(out, "ladder_report.json")
    store.dump_json(rep.to_dict(), lpath)
    dpath = os.path.join(out, "ladder_differences.csv")
    store.write_table(dpath, ["level", "eps_j", "eps_j1", "Lp", "L2", "sup_G"],
                      ([j, eps[j], eps[j + 1],
                        *(np.nan if v is None else v for v in
                          (rep.lp_differences[j], rep.l2_differences[j], rep.sup_G_differences[j]))]
                       for j in range(len(eps) - 1)))
    outputs += [lpath, dpath]
    store.write_manifest(out, "ladder", cfg, None, params.to_dict(), cfg["mesh"], outputs,
                         args.deterministic)
    print(f"ladder: {len(eps)} levels, sup G differences {rep.sup_G_differences} -> {out}")
    return EXIT_NONCONVERGENCE if rep.errors else EXIT_OK


def cmd_regularity(args):
    run = args.run
    if run is None or not os.path.isfile(os.path.join(run, "config.json")):
        raise ConfigError("regularity needs --run pointing at a solve or ladder run directory")
    cfg = store.load_json(os.path.join(run, "config.json"))
    opts = _read_config(args.config)
    params = ModelParams.from_dict(cfg["params"])
    mesh = store.read_mesh(run, cfg.get("mesh"))
    if os.path.isfile(os.path.join(run, "u.csv")):
        u_path = os.path.join(run, "u.csv")
    else:
        levels = sorted(d for d in os.listdir(run) if d.startswith("level_")
                        and os.path.isfile(os.path.join(run, d, "u.csv")))
        if not levels:
            raise ConfigError(f"no solved field found in {run}")
        u_path = os.path.join(run, levels[-1], "u.csv")
        eps = cfg["epsilons"][int(levels[-1].split("_")[1])]
        params = params.with_(epsilon=eps, delta=cfg.get("delta", params.delta))
    field = DiscreteField(mesh, store.read_u(u_path))
    _, frows = store.read_table(os.path.join(run, "load.csv")) if os.path.isfile(
        os.path.join(run, "load.csv")) else (None, None)
    if frows is not None:
        f = np.array([[float(x) for x in r] for r in frows])
    else:
        f = presets.build_load(cfg.get("load", {}), mesh, field.N)
    seed = args.seed if args.seed is not None else int(opts.get("seed", 0))
    try:
        rep = regularity.analyze(
            field, f, params,
            delta=opts.get("delta"),
            radii=tuple(opts.get("radii", (0.1, 0.2))),
            n_centers=int(opts.get("centers", 8)),
            seed=seed,
            pair_budget=int(opts.get("pair_budget", 20000)),
            schedule=opts.get("schedule"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = args.out or os.path.normpath(run) + "_regularity"
    os.makedirs(out, exist_ok=True)
    paths = [os.path.join(out, n) for n in ("regularity_report.json", "excess.csv", "holder_pairs.csv")]
    with open(paths[0], "w") as fh:
        fh.write(rep.to_json() + "\n")
    with open(paths[1], "w") as fh:
        fh.write(rep.excess_csv())
    with open(paths[2], "w") as fh:
        fh.write(rep.holder_csv())
    store.write_manifest(out, "regularity", {"run": os.path.abspath(run), **opts}, seed,
                         params.to_dict(), cfg.get("mesh"), paths, args.deterministic)
    print(f"regularity: alpha={rep.holder_fit.alpha:.4f} plug_radius={rep.plug_radius:.4f} -> {out}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "solve": cmd_solve, "ladder": cmd_ladder,
            "regularity": cmd_regularity}


def build_parser():
    ap = argparse.ArgumentParser(prog="facetflow", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--run", help="run directory (regularity)")
    ap.add_argument("--deterministic", action="store_true",
                    help="single worker, fixed reduction order")
    ap.add_argument("--seed", type=int, help="override the config seed")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.deterministic:
        os.environ["FACETFLOW_THREADS"] = "1"
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
