"""Named problem setups and builders for loads and boundary data."""
from __future__ import annotations

import copy
import csv

import numpy as np

from . import mesh as meshmod
from .density import ModelParams
from .solver import DiscreteField, ToleranceSpec

PRESETS = {
    # Bingham flow in a circular pipe: plug of radius 2b/f
    "bingham_disk": {
        "mesh": {"kind": "disk", "radius": 1.0, "cells": 128},
        "params": {"b": 0.25, "p": 2.0, "delta": 0.3, "epsilon": 0.00625},
        "load": {"kind": "constant", "value": 1.0},
        "boundary": {"kind": "zero"},
        "N": 1,
        "epsilons": [0.05, 0.025, 0.0125, 0.00625],
        "delta": 0.3,
    },
    # stationary crystal-growth type problem, p = 3
    "crystal_p3": {
        "mesh": {"kind": "rectangle", "x0": -1.0, "x1": 1.0, "y0": -1.0, "y1": 1.0,
                 "nx": 32, "ny": 32},
        "params": {"b": 1.0, "p": 3.0, "delta": 0.2, "epsilon": 0.01},
        "load": {"kind": "harmonic", "scale": 4.0},
        "boundary": {"kind": "zero"},
        "N": 1,
        "epsilons": [0.04, 0.02, 0.01],
        "delta": 0.2,
    },
    # affine boundary data and no load: the minimizer is the affine map
    "linear_boundary": {
        "mesh": {"kind": "rectangle", "nx": 16, "ny": 16},
        "params": {"b": 1.0, "p": 2.5, "delta": 0.5, "epsilon": 0.1},
        "load": {"kind": "constant", "value": 0.0},
        "boundary": {"kind": "linear", "xi": [[1.0, 0.5]], "offset": [0.0]},
        "N": 1,
        "epsilons": [0.1, 0.05, 0.025],
        "delta": 0.5,
    },
}


def expand(config):
    """Merge a config over its preset; explicit keys win (one level deep)."""
    config = copy.deepcopy(config)
    name = config.get("preset")
    if name is None:
        return config
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}")
    out = copy.deepcopy(PRESETS[name])
    for key, val in config.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key in ("params",):
            out[key].update(val)
        else:
            out[key] = val
    return out


def build_load(spec, mesh, N=1, base_dir=None):
    kind = spec.get("kind", "constant")
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    if kind == "constant":
        val = np.broadcast_to(np.asarray(spec.get("value", 0.0), float), (N,))
        return np.tile(val, (mesh.n_vertices, 1))
    if kind == "gaussian":
        cx, cy = spec.get("center", (0.0, 0.0))
        w = float(spec.get("width", 0.25))
        a = np.broadcast_to(np.asarray(spec.get("amplitude", 1.0), float), (N,))
        bump = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * w * w))
        return bump[:, None] * a[None, :]
    if kind == "harmonic":
        s = float(spec.get("scale", 1.0))
        return np.tile((s * (x * x - y * y))[:, None], (1, N))
    if kind == "csv":
        import os

        path = spec["path"]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        vals = np.array([[float(v) for v in r] for r in rows])
        if vals.shape != (mesh.n_vertices, N):
            raise ValueError(f"load CSV must have shape {(mesh.n_vertices, N)}, got {vals.shape}")
        return vals
    raise ValueError(f"unknown load kind {kind!r}")


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def build_boundary(spec, mesh, N=1):
    """Initial field: boundary data on the boundary, same function inside."""
    kind = spec.get("kind", "zero")
    X = mesh.vertices
    if kind == "zero":
        u = np.zeros((mesh.n_vertices, N))
    elif kind == "linear":
        xi = np.asarray(spec["xi"], float).reshape(N, 2)
        c = np.asarray(spec.get("offset", [0.0] * N), float)
        u = X @ xi.T + c
    elif kind == "quadratic":
        a = float(spec.get("a", 1.0))
        u = np.tile((a * (X[:, 0] ** 2 + 0.5 * X[:, 1] ** 2))[:, None], (1, N))
    else:
        raise ValueError(f"unknown boundary kind {kind!r}")
    return DiscreteField(mesh, u)


def build_problem(config, base_dir=None):
    """``(mesh, field0, f, params, tol)`` from an expanded config."""
    cfg = expand(config)
    for key in ("mesh", "params"):
        if key not in cfg:
            raise ValueError(f"config is missing {key!r}")
    N = int(cfg.get("N", 1))
    m = meshmod.from_spec(cfg["mesh"])
    params = ModelParams.from_dict(cfg["params"])
    f = build_load(cfg.get("load", {"kind": "constant", "value": 0.0}), m, N, base_dir)
    field0 = build_boundary(cfg.get("boundary", {"kind": "zero"}), m, N)
    tol = ToleranceSpec.from_dict(cfg.get("tolerance", {}))
    return m, field0, f, params, tol
