"""CSV/JSON persistence for meshes, fields and run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
import subprocess

import numpy as np

from . import __version__
from ._backend import BACKEND
from .mesh import Mesh

FMT = ".17g"


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def dump_json(obj, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True))
        fh.write("\n")


def _num(x):
    return format(float(x), FMT)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (str, bool, np.bool_)) or isinstance(v, (int, np.integer))
                        else _num(v) for v in r])


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_mesh(mesh, directory):
    v = os.path.join(directory, "vertices.csv")
    t = os.path.join(directory, "triangles.csv")
    write_table(v, ["x", "y", "boundary"],
                ([x, y, int(b)] for (x, y), b in zip(mesh.vertices, mesh.boundary_mask)))
    write_table(t, ["v0", "v1", "v2"], (list(map(int, tri)) for tri in mesh.triangles))
    return [v, t]


def read_mesh(directory, spec=None):
    _, vr = read_table(os.path.join(directory, "vertices.csv"))
    _, tr = read_table(os.path.join(directory, "triangles.csv"))
    verts = np.array([[float(r[0]), float(r[1])] for r in vr])
    mask = np.array([r[2] == "1" for r in vr])
    tris = np.array([[int(x) for x in r] for r in tr], dtype=np.int64)
    return Mesh(verts, tris, mask, spec or {})


def write_field(field, directory, prefix=""):
    N = field.N
    up = os.path.join(directory, prefix + "u.csv")
    dp = os.path.join(directory, prefix + "Du.csv")
    write_table(up, [f"u{i}" for i in range(N)], field.u)
    Du = field.Du
    hdr = [f"Du{i}{a}" for i in range(N) for a in range(2)]
    write_table(dp, hdr, Du.reshape(len(Du), -1))
    return [up, dp]


def read_u(path):
    _, rows = read_table(path)
    return np.array([[float(x) for x in r] for r in rows])


def git_describe():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def write_manifest(directory, command, cfg, seed, params, mesh_spec, outputs, deterministic):
    """Write ``manifest.json`` listing ``outputs`` relative to ``directory``."""
    rel = sorted(os.path.relpath(p, directory) for p in outputs)
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "params": params,
        "mesh_spec": mesh_spec,
        "outputs": rel,
        "deterministic": bool(deterministic),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "build": {"version": __version__, "git_describe": git_describe(), "backend": BACKEND},
    }
    path = os.path.join(directory, "manifest.json")
    dump_json(manifest, path)
    return manifest
