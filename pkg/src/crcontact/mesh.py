"""Triangulations of axis-aligned rectangles with labeled boundary edges.

Provides structured grid generation, uniform red refinement with a
parent map, and edge classification into interior / Dirichlet / Neumann /
contact sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh construction or classification input."""


class BoundaryLabel(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    CONTACT = 3


SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class BoundarySegment:
    """An axis-aligned interval on one side of the rectangle.

    ``lo`` and ``hi`` are coordinates along the side (y for left/right,
    x for bottom/top).
    """

    side: str
    lo: float
    hi: float
    label: BoundaryLabel

    def __post_init__(self):
        if self.side not in SIDES:
            raise MeshError(f"unknown side {self.side!r}, expected one of {SIDES}")
        if not self.lo < self.hi:
            raise MeshError(f"segment on {self.side}: need lo < hi, got [{self.lo}, {self.hi}]")
        if self.label == BoundaryLabel.INTERIOR:
            raise MeshError("boundary segments cannot be labeled INTERIOR")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle with a labeled decomposition of its boundary."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    boundary_spec: tuple[BoundarySegment, ...]

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise MeshError("domain must have positive extent in both directions")
        if not any(s.label == BoundaryLabel.DIRICHLET for s in self.boundary_spec):
            raise MeshError("the Dirichlet boundary part must have positive length")

    @staticmethod
    def rectangle(x_min, x_max, y_min, y_max, *, left, right, bottom, top) -> "Domain":
        """Convenience constructor labeling each full side."""
        segs = (
            BoundarySegment("left", y_min, y_max, left),
            BoundarySegment("right", y_min, y_max, right),
            BoundarySegment("bottom", x_min, x_max, bottom),
            BoundarySegment("top", x_min, x_max, top),
        )
        return Domain(x_min, x_max, y_min, y_max, segs)

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.x_max - self.x_min, self.y_max - self.y_min))


@dataclass
class EdgeSets:
    """Disjoint partition of edge indices plus the stabilization set."""

    interior: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray
    contact: np.ndarray
    stabilized: np.ndarray  # interior union Dirichlet


class Mesh:
    """Immutable triangulation with classified edges.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    edges : (ne, 2) int array, each row sorted
    edge_tris : (ne, 2) int array of adjacent triangles, -1 when absent
    tri_edges : (nt, 3) int array; entry j is the edge opposite local vertex j
    edge_labels : (ne,) int array of BoundaryLabel values
    midpoints : (ne, 2) edge midpoints
    edge_lengths : (ne,) edge lengths
    areas : (nt,) triangle areas
    level : refinement depth (0 for generated meshes)
    parent_map : (nt,) int array mapping each triangle to its coarse parent,
        present only on refined meshes
    parent_mesh : the mesh this one was refined from, or None
    """

    def __init__(self, vertices, triangles, domain, edge_labels_by_pair=None,
                 level=0, parent_map=None, parent_mesh=None):
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")

        # enforce counterclockwise orientation
        p = vertices
        t = triangles.copy()
        a = p[t[:, 1]] - p[t[:, 0]]
        b = p[t[:, 2]] - p[t[:, 0]]
        signed = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        flip = signed < 0
        t[flip] = t[flip][:, [0, 2, 1]]
        signed = np.abs(signed)
        if np.any(signed <= 0):
            raise MeshError("degenerate triangle with zero area")

        self.vertices = p
        self.triangles = t
        self.areas = signed
        self.domain = domain
        self.level = level
        self.parent_map = None if parent_map is None else np.asarray(parent_map, dtype=np.int64)
        self.parent_mesh = parent_mesh

        self._build_edges()
        self._classify_edges(edge_labels_by_pair)
        for arr in (self.vertices, self.triangles, self.edges, self.edge_tris,
                    self.tri_edges, self.edge_labels, self.areas,
                    self.midpoints, self.edge_lengths):
            arr.setflags(write=False)
        if self.parent_map is not None:
            self.parent_map.setflags(write=False)

    # -- construction helpers ------------------------------------------------

    def _build_edges(self):
        t = self.triangles
        nt = len(t)
        # edge j of triangle is opposite local vertex j
        raw = np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        raw_sorted = np.sort(raw, axis=1)
        edges, inv = np.unique(raw_sorted, axis=0, return_inverse=True)
        ne = len(edges)
        tri_edges = inv.reshape(3, nt).T

        edge_tris = np.full((ne, 2), -1, dtype=np.int64)
        counts = np.zeros(ne, dtype=np.int64)
        for local in range(3):
            for tri, e in enumerate(tri_edges[:, local]):
                if counts[e] >= 2:
                    raise MeshError(f"edge {e} shared by more than two triangles")
                edge_tris[e, counts[e]] = tri
                counts[e] += 1
        if np.any(counts == 0):
            raise MeshError("dangling edge with no adjacent triangle")

        self.edges = edges
        self.tri_edges = tri_edges
        self.edge_tris = edge_tris
        self.midpoints = 0.5 * (self.vertices[edges[:, 0]] + self.vertices[edges[:, 1]])
        dv = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        self.edge_lengths = np.hypot(dv[:, 0], dv[:, 1])

    def _classify_edges(self, edge_labels_by_pair):
        ne = len(self.edges)
        labels = np.full(ne, int(BoundaryLabel.INTERIOR), dtype=np.int64)
        boundary = self.edge_tris[:, 1] < 0
        if edge_labels_by_pair is not None:
            for e in np.nonzero(boundary)[0]:
                key = (int(self.edges[e, 0]), int(self.edges[e, 1]))
                try:
                    labels[e] = int(edge_labels_by_pair[key])
                except KeyError:
                    raise MeshError(f"boundary edge {key} has no inherited label") from None
        else:
            dom = self.domain
            tol = 1e-12 * dom.diameter
            for e in np.nonzero(boundary)[0]:
                mx, my = self.midpoints[e]
                if abs(mx - dom.x_min) <= tol:
                    side, coord = "left", my
                elif abs(mx - dom.x_max) <= tol:
                    side, coord = "right", my
                elif abs(my - dom.y_min) <= tol:
                    side, coord = "bottom", mx
                elif abs(my - dom.y_max) <= tol:
                    side, coord = "top", mx
                else:
                    raise MeshError(f"boundary edge midpoint {(mx, my)} is not on the rectangle boundary")
                label = None
                for seg in dom.boundary_spec:
                    if seg.side == side and seg.lo - tol <= coord <= seg.hi + tol:
                        label = seg.label
                        break
                if label is None:
                    raise MeshError(f"boundary edge at {(mx, my)} on side {side!r} is unlabeled")
                labels[e] = int(label)
        self.edge_labels = labels

    # -- queries ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h_max(self) -> float:
        """Largest triangle diameter (longest edge of the mesh)."""
        return float(self.edge_lengths.max())

    def triangle_coords(self, t: int) -> np.ndarray:
        return self.vertices[self.triangles[t]]

    def boundary_side(self, e: int) -> str:
        """Which rectangle side a boundary edge lies on."""
        if self.edge_tris[e, 1] >= 0:
            raise MeshError(f"edge {e} is interior")
        dom = self.domain
        tol = 1e-12 * dom.diameter
        mx, my = self.midpoints[e]
        if abs(mx - dom.x_min) <= tol:
            return "left"
        if abs(mx - dom.x_max) <= tol:
            return "right"
        if abs(my - dom.y_min) <= tol:
            return "bottom"
        if abs(my - dom.y_max) <= tol:
            return "top"
        raise MeshError(f"boundary edge {e} is not on the rectangle boundary")

    def dump(self, path) -> None:
        """Write the plain-text mesh format: one line per entity."""
        with open(path, "w") as out:
            for x, y in self.vertices:
                out.write(f"v {float(x)!r} {float(y)!r}\n")
            for i, j, k in self.triangles:
                out.write(f"t {i} {j} {k}\n")
            for (i, j), lab in zip(self.edges, self.edge_labels):
                out.write(f"e {i} {j} {BoundaryLabel(lab).name}\n")


def generate_structured(domain: Domain, n: int) -> Mesh:
    """Uniform n-by-n grid of squares, each split along the same diagonal.

    The diagonal runs lower-left to upper-right in every square. Vertex
    coordinates are exact multiples of the grid spacing.
    """
    if n < 1:
        raise MeshError("need at least one subdivision per side")
    dx = (domain.x_max - domain.x_min) / n
    dy = (domain.y_max - domain.y_min) / n
    xs = domain.x_min + dx * np.arange(n + 1)
    ys = domain.y_min + dy * np.arange(n + 1)
    xx, yy = np.meshgrid(xs, ys)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return Mesh(vertices, np.array(tris), domain)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: split each triangle into 4 congruent children.

    Boundary labels are inherited from the parent edges; the parent map
    records which coarse triangle each child came from.
    """
    nv = mesh.n_vertices
    midvert = nv + np.arange(mesh.n_edges)  # one new vertex per edge
    vertices = np.vstack([mesh.vertices, mesh.midpoints])

    t = mesh.triangles
    te = mesh.tri_edges
    m0, m1, m2 = midvert[te[:, 0]], midvert[te[:, 1]], midvert[te[:, 2]]
    v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
    # children: three corner triangles plus the center one
    children = np.empty((4 * mesh.n_triangles, 3), dtype=np.int64)
    children[0::4] = np.column_stack([v0, m2, m1])
    children[1::4] = np.column_stack([m2, v1, m0])
    children[2::4] = np.column_stack([m1, m0, v2])
    children[3::4] = np.column_stack([m0, m1, m2])
    parent_map = np.repeat(np.arange(mesh.n_triangles), 4)

    # each boundary parent edge (a, b) with midpoint m contributes the
    # labeled child edges (a, m) and (m, b); every other new edge is interior
    labels = {}
    boundary = np.nonzero(mesh.edge_tris[:, 1] < 0)[0]
    for e in boundary:
        a, b = mesh.edges[e]
        m = midvert[e]
        lab = mesh.edge_labels[e]
        labels[tuple(sorted((int(a), int(m))))] = lab
        labels[tuple(sorted((int(m), int(b))))] = lab

    return Mesh(vertices, children, mesh.domain, edge_labels_by_pair=labels,
                level=mesh.level + 1, parent_map=parent_map, parent_mesh=mesh)


def edge_sets(mesh: Mesh) -> EdgeSets:
    """Partition edges by label and form the stabilization set E^0."""
    lab = mesh.edge_labels
    interior = np.nonzero(lab == BoundaryLabel.INTERIOR)[0]
    dirichlet = np.nonzero(lab == BoundaryLabel.DIRICHLET)[0]
    neumann = np.nonzero(lab == BoundaryLabel.NEUMANN)[0]
    contact = np.nonzero(lab == BoundaryLabel.CONTACT)[0]
    stabilized = np.sort(np.concatenate([interior, dirichlet]))
    return EdgeSets(interior, dirichlet, neumann, contact, stabilized)
