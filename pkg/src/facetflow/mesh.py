"""Structured triangulations of rectangles and disks with P1 geometry."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3), counter-clockwise
    boundary_mask: np.ndarray  # (V,)
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_mask = np.asarray(self.boundary_mask, dtype=bool)
        P = self.vertices[self.triangles]
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        twice = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(twice <= 0):
            raise ValueError("mesh has non-positive element areas")
        self.element_area = 0.5 * twice
        # gradients of the barycentric coordinates, constant per element
        g = np.empty((len(P), 3, 2))
        for k in range(3):
            a = P[:, (k + 1) % 3]
            b = P[:, (k + 2) % 3]
            g[:, k, 0] = (a[:, 1] - b[:, 1]) / twice
            g[:, k, 1] = (b[:, 0] - a[:, 0]) / twice
        self.grads = g
        self.centroids = P.mean(axis=1)
        self.lumped_mass = np.bincount(
            self.triangles.ravel(),
            weights=np.repeat(self.element_area / 3.0, 3),
            minlength=len(self.vertices),
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def area(self):
        return float(self.element_area.sum())

    @property
    def h(self):
        P = self.vertices[self.triangles]
        e = P - np.roll(P, 1, axis=1)
        return float(np.sqrt((e**2).sum(-1)).max())

    def edges(self):
        """Unique edges (E, 2) and the number of triangles sharing each."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def check_conforming(self):
        """Raise unless every edge has one or two triangles and the
        single-triangle edges are exactly the boundary edges."""
        uniq, counts = self.edges()
        if np.any(counts > 2):
            raise ValueError("edge shared by more than two triangles")
        outer = uniq[counts == 1]
        if not np.all(self.boundary_mask[outer]):
            raise ValueError("boundary edge with an interior endpoint")
        on_outer = np.zeros(self.n_vertices, bool)
        on_outer[outer.ravel()] = True
        if np.any(self.boundary_mask != on_outer):
            raise ValueError("boundary mask disagrees with the edge topology")
        return True


def _grid_triangles(keep, nx, ny, diagonal):
    """Split kept cells into two triangles; ``diagonal[i, j]`` True means
    the cut runs from the lower-left to the upper-right corner."""
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    tris = []
    for j in range(ny):
        for i in range(nx):
            if not keep[i, j]:
                continue
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if diagonal[i, j]:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def _compact(vertices, tris):
    used = np.unique(tris)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[tris]


def _boundary_from_edges(nv, tris):
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    mask = np.zeros(nv, bool)
    mask[uniq[counts == 1].ravel()] = True
    return mask


def rectangle(x0=0.0, x1=1.0, y0=0.0, y1=1.0, nx=16, ny=16):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    keep = np.ones((nx, ny), bool)
    tris = _grid_triangles(keep, nx, ny, np.ones((nx, ny), bool))
    mask = _boundary_from_edges(len(verts), tris)
    spec = {"kind": "rectangle", "x0": x0, "x1": x1, "y0": y0, "y1": y1, "nx": nx, "ny": ny}
    return Mesh(verts, tris, mask, spec)


def disk(radius=1.0, cells=64, center=(0.0, 0.0)):
    """Disk of the given radius from a ``cells x cells`` grid on its bounding
    square.  Cells whose centre lies inside are kept, diagonals point away
    from the centre in each quadrant, and boundary vertices are projected
    radially onto the circle."""
    if cells < 4 or cells % 2:
        raise ValueError("cells must be an even integer >= 4")
    h = 2.0 * radius / cells
    xs = -radius + h * np.arange(cells + 1)
    X, Y = np.meshgrid(xs, xs)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    cx = -radius + h * (np.arange(cells) + 0.5)
    CX, CY = np.meshgrid(cx, cx, indexing="ij")
    keep = CX**2 + CY**2 < radius**2
    diagonal = (CX * CY) > 0
    tris = _grid_triangles(keep, cells, cells, diagonal)
    verts, tris = _compact(verts, tris)
    mask = _boundary_from_edges(len(verts), tris)
    r = np.hypot(verts[mask, 0], verts[mask, 1])
    verts[mask] *= (radius / r)[:, None]
    verts = verts + np.asarray(center, float)
    spec = {"kind": "disk", "radius": radius, "cells": cells, "center": list(center)}
    return Mesh(verts, tris, mask, spec)


def from_spec(spec):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "rectangle":
        return rectangle(**spec)
    if kind == "disk":
        if "center" in spec:
            spec["center"] = tuple(spec["center"])
        return disk(**spec)
    raise ValueError(f"unknown mesh kind {kind!r}")


def refine_spec(spec):
    """Descriptor of the uniformly refined mesh (h -> h/2)."""
    spec = dict(spec)
    if spec["kind"] == "rectangle":
        spec["nx"] *= 2
        spec["ny"] *= 2
    else:
        spec["cells"] *= 2
    return spec
