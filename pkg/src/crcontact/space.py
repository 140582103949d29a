"""Crouzeix-Raviart vector P1 space: DOF layout, basis, interpolation.

Degrees of freedom sit at edge midpoints, two components per edge.
Dirichlet edges carry no DOFs; contact edges carry only the tangential
component (the normal one is constrained to zero). Contact edges must be
axis-aligned so the constraint is a pure coordinate elimination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crcontact.mesh import BoundaryLabel, Mesh, MeshError

#: 2-point Gauss abscissae on [-1, 1] (exact for cubics on an edge)
GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def cr_gradients(coords: np.ndarray) -> tuple[np.ndarray, float]:
    """Constant gradients of the three CR shape functions on a triangle.

    Shape function j equals 1 on the edge opposite vertex j, i.e.
    psi_j = 1 - 2 * lambda_j with lambda_j the barycentric coordinate.
    Returns (grads (3, 2), area).
    """
    p = np.asarray(coords, dtype=float)
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if area <= 0:
        raise MeshError("triangle is degenerate or clockwise")
    grad_bary = np.array([
        [p[1, 1] - p[2, 1], p[2, 0] - p[1, 0]],
        [p[2, 1] - p[0, 1], p[0, 0] - p[2, 0]],
        [p[0, 1] - p[1, 1], p[1, 0] - p[0, 0]],
    ]) / (2.0 * area)
    return -2.0 * grad_bary, area


def cr_values(coords: np.ndarray, points: np.ndarray) -> np.ndarray:
    """CR shape function values at given points inside a triangle.

    Returns an (npts, 3) array; row sums are identically 1.
    """
    p = np.asarray(coords, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    if det <= 0:
        raise MeshError("triangle is degenerate or clockwise")
    r = pts - p[0]
    l1 = (r[:, 0] * d2[1] - r[:, 1] * d2[0]) / det
    l2 = (d1[0] * r[:, 1] - d1[1] * r[:, 0]) / det
    l0 = 1.0 - l1 - l2
    bary = np.column_stack([l0, l1, l2])
    return 1.0 - 2.0 * bary


class CRSpace:
    """DOF layout of the constrained CR space on a classified mesh.

    Attributes
    ----------
    mesh : Mesh
    dof_x, dof_y : (ne,) int arrays mapping edge -> free DOF index, -1 when
        the component is eliminated (Dirichlet edge, or contact normal)
    local_dofs : (nt, 3, 2) free DOF indices per triangle / local edge / comp
    contact_edges : indices of contact edges
    contact_tangent_dof : free DOF of the tangential component per contact edge
    contact_tangent_axis : 0 or 1 per contact edge (axis the edge runs along)
    n_dofs_reported : 2 x (#edges - #Dirichlet edges)
    n_dofs_free : after eliminating the contact normal components
    """

    def __init__(self, mesh: Mesh):
        labels = mesh.edge_labels
        boundary = mesh.edge_tris[:, 1] < 0
        if np.any(boundary & (labels == BoundaryLabel.INTERIOR)):
            raise MeshError("mesh has unclassified boundary edges")

        ne = mesh.n_edges
        dof_x = np.full(ne, -1, dtype=np.int64)
        dof_y = np.full(ne, -1, dtype=np.int64)
        contact_edges = []
        contact_tangent_dof = []
        contact_tangent_axis = []
        tol = 1e-12 * mesh.domain.diameter
        nxt = 0
        for e in range(ne):
            lab = labels[e]
            if lab == BoundaryLabel.DIRICHLET:
                continue
            if lab == BoundaryLabel.CONTACT:
                dv = mesh.vertices[mesh.edges[e, 1]] - mesh.vertices[mesh.edges[e, 0]]
                if abs(dv[1]) <= tol:
                    axis = 0  # horizontal edge: tangent x, normal y constrained
                elif abs(dv[0]) <= tol:
                    axis = 1
                else:
                    raise MeshError("contact edges must be axis-aligned")
                if axis == 0:
                    dof_x[e] = nxt
                else:
                    dof_y[e] = nxt
                contact_edges.append(e)
                contact_tangent_dof.append(nxt)
                contact_tangent_axis.append(axis)
                nxt += 1
            else:
                dof_x[e] = nxt
                dof_y[e] = nxt + 1
                nxt += 2

        self.mesh = mesh
        self.dof_x = dof_x
        self.dof_y = dof_y
        self.n_dofs_free = nxt
        n_dirichlet = int(np.count_nonzero(labels == BoundaryLabel.DIRICHLET))
        self.n_dofs_reported = 2 * (ne - n_dirichlet)
        self.contact_edges = np.array(contact_edges, dtype=np.int64)
        self.contact_tangent_dof = np.array(contact_tangent_dof, dtype=np.int64)
        self.contact_tangent_axis = np.array(contact_tangent_axis, dtype=np.int64)

        te = mesh.tri_edges
        self.local_dofs = np.stack([dof_x[te], dof_y[te]], axis=2)
        for arr in (self.dof_x, self.dof_y, self.local_dofs, self.contact_edges,
                    self.contact_tangent_dof, self.contact_tangent_axis):
            arr.setflags(write=False)

    @property
    def contact_edge_lengths(self) -> np.ndarray:
        return self.mesh.edge_lengths[self.contact_edges]

    def edge_gauss_points(self, e: int) -> np.ndarray:
        """The two Gauss points on edge e, as a (2, 2) array."""
        a = self.mesh.vertices[self.mesh.edges[e, 0]]
        b = self.mesh.vertices[self.mesh.edges[e, 1]]
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        return mid[None, :] + GAUSS2[:, None] * half[None, :]


def build_space(mesh: Mesh) -> CRSpace:
    return CRSpace(mesh)


@dataclass
class CRFunction:
    """A function in the constrained CR space: one coefficient per free DOF."""

    space: CRSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs_free,):
            raise ValueError(
                f"expected {self.space.n_dofs_free} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zero(cls, space: CRSpace) -> "CRFunction":
        return cls(space, np.zeros(space.n_dofs_free))

    def local_values(self) -> np.ndarray:
        """Midpoint values per triangle: (nt, 3 local edges, 2 components).

        Constrained components contribute zero.
        """
        ld = self.space.local_dofs
        padded = np.concatenate([self.coeffs, [0.0]])
        return padded[ld]  # -1 picks the trailing zero

    def evaluate_in_tri(self, t: int, points: np.ndarray) -> np.ndarray:
        """Evaluate the piecewise-linear field inside triangle t: (npts, 2)."""
        coords = self.space.mesh.triangle_coords(t)
        vals = cr_values(coords, points)  # (npts, 3)
        local = self.local_values()[t]  # (3, 2)
        return vals @ local

    def gradient_in_tri(self, t: int) -> np.ndarray:
        """Constant displacement gradient on triangle t as a 2x2 array."""
        coords = self.space.mesh.triangle_coords(t)
        grads, _ = cr_gradients(coords)  # (3, 2)
        local = self.local_values()[t]  # (3, 2) values
        return local.T @ grads  # grad[i, j] = d u_i / d x_j

    def tangential_contact_values(self) -> np.ndarray:
        """Tangential midpoint values on the contact edges."""
        return self.coeffs[self.space.contact_tangent_dof]

    def __add__(self, other: "CRFunction") -> "CRFunction":
        self._check_same_space(other)
        return CRFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "CRFunction") -> "CRFunction":
        self._check_same_space(other)
        return CRFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, alpha: float) -> "CRFunction":
        return CRFunction(self.space, alpha * self.coeffs)

    __rmul__ = __mul__

    def _check_same_space(self, other):
        if other.space is not self.space:
            raise ValueError("operands live on different CR spaces")


def interpolate_cr(v, space: CRSpace) -> CRFunction:
    """Edge-mean interpolation onto the constrained CR space.

    ``v`` is a callable (x, y) -> length-2 sequence. Edge means use the
    2-point Gauss rule (exact for quadratic traces). Constrained DOFs are
    dropped: Dirichlet edges are skipped and the contact normal component
    is discarded.
    """
    mesh = space.mesh
    coeffs = np.zeros(space.n_dofs_free)
    for e in range(mesh.n_edges):
        dx, dy = space.dof_x[e], space.dof_y[e]
        if dx < 0 and dy < 0:
            continue
        pts = space.edge_gauss_points(e)
        mean = 0.5 * (np.asarray(v(*pts[0]), dtype=float)
                      + np.asarray(v(*pts[1]), dtype=float))
        if dx >= 0:
            coeffs[dx] = mean[0]
        if dy >= 0:
            coeffs[dy] = mean[1]
    return CRFunction(space, coeffs)


def prolongation_matrix(coarse_space: CRSpace, fine_space: CRSpace):
    """Sparse transfer operator from coarse to fine free coefficients.

    Each fine DOF takes the coarse field's value at the fine edge midpoint,
    evaluated inside the parent triangle of an adjacent fine triangle. Fine
    edges lying on a coarse edge see two parents; their traces are averaged.
    The result is cached on the fine space.
    """
    import scipy.sparse as sp

    fine_mesh = fine_space.mesh
    if fine_mesh.parent_mesh is not coarse_space.mesh or fine_mesh.parent_map is None:
        raise ValueError("fine space is not a uniform refinement of the coarse space")
    cached = getattr(fine_space, "_prolongation_cache", None)
    if cached is not None and cached[0] is coarse_space:
        return cached[1]

    parent = fine_mesh.parent_map
    rows, cols, vals = [], [], []
    for e in range(fine_mesh.n_edges):
        dofs = (fine_space.dof_x[e], fine_space.dof_y[e])
        if dofs[0] < 0 and dofs[1] < 0:
            continue
        mid = fine_mesh.midpoints[e]
        parents = {int(parent[t]) for t in fine_mesh.edge_tris[e] if t >= 0}
        weight = 1.0 / len(parents)
        for pt in parents:
            traces = cr_values(coarse_space.mesh.triangle_coords(pt), mid[None, :])[0]
            for j in range(3):
                for c in range(2):
                    src = coarse_space.local_dofs[pt, j, c]
                    if src < 0 or dofs[c] < 0:
                        continue
                    rows.append(dofs[c])
                    cols.append(src)
                    vals.append(weight * traces[j])
    P = sp.coo_matrix((vals, (rows, cols)),
                      shape=(fine_space.n_dofs_free, coarse_space.n_dofs_free)).tocsr()
    fine_space._prolongation_cache = (coarse_space, P)
    return P


def prolongate(coarse: CRFunction, fine_space: CRSpace) -> CRFunction:
    """Transfer a coarse CR function to the next uniform refinement."""
    P = prolongation_matrix(coarse.space, fine_space)
    return CRFunction(fine_space, P @ coarse.coeffs)
