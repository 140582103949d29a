"""Assembly of the stabilized bilinear form, loads and friction coupling.

The stiffness combines the broken elastic energy (constant strain per
element, exact) with an edge-jump penalty 2*rho*mu/h_e over interior and
Dirichlet edges, integrated with 2-point Gauss (exact for CR jumps, which
are linear along each edge). The friction functional uses the one-point
midpoint rule per contact edge, whose value is exactly the tangential DOF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from crcontact.mesh import BoundaryLabel, edge_sets
from crcontact.material import MaterialModel
from crcontact.space import CRFunction, CRSpace, cr_gradients, cr_values


class AssemblyError(ValueError):
    """Raised for inadmissible assembly parameters."""


@dataclass
class DiscreteSystem:
    """Stiffness over the free DOFs plus the contact coupling layout.

    ``contact_weights`` are the per-contact-edge lengths h_e; the Uzawa
    coupling entry for multiplier lambda_e is g_a * h_e * lambda_e placed at
    the edge's tangential DOF.
    """

    space: CRSpace
    material: MaterialModel
    rho: float
    K: sp.csr_matrix
    contact_tangent_dof: np.ndarray = field(init=False)
    contact_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.contact_tangent_dof = self.space.contact_tangent_dof
        self.contact_weights = self.space.contact_edge_lengths


@dataclass(frozen=True)
class LoadSpec:
    """Body force, Neumann traction, friction bound and initial condition.

    The body force ``f`` is a constant vector; the traction ``g`` is
    componentwise affine in (x, y): g_i(x, y) = c0 + cx*x + cy*y, scaled by
    the time factor s(t) in {1, t}. ``g_sides`` optionally restricts the
    traction to named rectangle sides (other Neumann edges are traction
    free). ``u0`` is a callable (x, y) -> (2,) or None for zero.
    """

    f: tuple[float, float] = (0.0, 0.0)
    f_time: str = "const"
    g_coeffs: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    g_time: str = "const"
    g_sides: Optional[tuple[str, ...]] = None
    g_a: float = 0.0
    u0: Optional[Callable] = None

    def __post_init__(self):
        if self.g_a < 0:
            raise AssemblyError(f"friction bound must be nonnegative, got {self.g_a}")
        for name in (self.f_time, self.g_time):
            if name not in ("const", "linear"):
                raise AssemblyError(f"time factor must be 'const' or 'linear', got {name!r}")

    @staticmethod
    def _factor(name: str, t: float) -> float:
        return 1.0 if name == "const" else t

    def f_at(self, t: float) -> np.ndarray:
        return np.asarray(self.f, dtype=float) * self._factor(self.f_time, t)

    def g_at(self, points: np.ndarray, t: float) -> np.ndarray:
        """Traction values at points (npts, 2), scaled by the time factor."""
        c = np.asarray(self.g_coeffs, dtype=float)  # (2, 3)
        vals = c[:, 0][None, :] + points @ c[:, 1:].T
        return vals * self._factor(self.g_time, t)


def element_stiffness(coords: np.ndarray, mat: MaterialModel) -> np.ndarray:
    """6x6 element matrix area * B^T D B in DOF order (e0x, e0y, ..., e2y).

    The strain is constant per element, so the one-point rule is exact.
    """
    grads, area = cr_gradients(coords)
    B = np.zeros((3, 6))
    for j in range(3):
        gx, gy = grads[j]
        B[:, 2 * j] = (gx, 0.0, gy)
        B[:, 2 * j + 1] = (0.0, gy, gx)
    return area * (B.T @ mat.dmatrix() @ B)


def assemble_stiffness(space: CRSpace, mat: MaterialModel, rho: float) -> DiscreteSystem:
    """Stabilized stiffness matrix over the free DOFs."""
    if rho <= 0:
        raise AssemblyError(f"stabilization parameter must be positive, got {rho}")
    mesh = space.mesh

    rows, cols, vals = [], [], []

    # element term: constant strain per triangle
    for t in range(mesh.n_triangles):
        Kt = element_stiffness(mesh.triangle_coords(t), mat)
        dofs = space.local_dofs[t].reshape(6)  # (e0x, e0y, e1x, e1y, e2x, e2y)
        _scatter(rows, cols, vals, dofs, Kt)

    # jump penalty over interior and Dirichlet edges
    sets = edge_sets(mesh)
    for e in sets.stabilized:
        pts = space.edge_gauss_points(e)
        h_e = mesh.edge_lengths[e]
        tris = [t for t in mesh.edge_tris[e] if t >= 0]
        signs = [1.0, -1.0][: len(tris)]
        phi = []  # rows of (dof pair per component, trace values at the 2 pts)
        dof_rows = []
        for tri, sign in zip(tris, signs):
            traces = sign * cr_values(mesh.triangle_coords(tri), pts)  # (2, 3)
            for j in range(3):
                phi.append(traces[:, j])
                dof_rows.append(space.local_dofs[tri, j])
        phi = np.array(phi)  # (nrows, 2 gauss pts)
        dof_rows = np.array(dof_rows)  # (nrows, 2 comps)
        # weight: (2 rho mu / h_e) * (h_e / 2) per Gauss point
        scalar = mat.mu * rho * (phi @ phi.T)
        for c in range(2):
            _scatter(rows, cols, vals, dof_rows[:, c], scalar)

    n = space.n_dofs_free
    K = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    K.sum_duplicates()
    return DiscreteSystem(space=space, material=mat, rho=rho, K=K)


def _scatter(rows, cols, vals, dofs, local):
    """Accumulate a dense local matrix into COO triplets, skipping -1 dofs."""
    keep = dofs >= 0
    idx = np.nonzero(keep)[0]
    if len(idx) == 0:
        return
    d = dofs[idx]
    r, c = np.meshgrid(d, d, indexing="ij")
    rows.append(r.ravel())
    cols.append(c.ravel())
    vals.append(local[np.ix_(idx, idx)].ravel())


def assemble_load(space: CRSpace, loads: LoadSpec, t: float) -> np.ndarray:
    """Load vector: body force plus Neumann traction at time t."""
    mesh = space.mesh
    F = np.zeros(space.n_dofs_free)

    fvec = loads.f_at(t)
    if np.any(fvec != 0.0):
        # 3-midpoint rule; basis j is 1 at its own midpoint, 0 at the others
        for tri in range(mesh.n_triangles):
            _, area = cr_gradients(mesh.triangle_coords(tri))
            for j in range(3):
                for c in range(2):
                    d = space.local_dofs[tri, j, c]
                    if d >= 0:
                        F[d] += fvec[c] * area / 3.0

    sides = loads.g_sides
    neumann = np.nonzero(mesh.edge_labels == BoundaryLabel.NEUMANN)[0]
    for e in neumann:
        if sides is not None and mesh.boundary_side(e) not in sides:
            continue
        pts = space.edge_gauss_points(e)
        gvals = loads.g_at(pts, t)  # (2 pts, 2 comps)
        if not np.any(gvals):
            continue
        tri = mesh.edge_tris[e, 0]
        traces = cr_values(mesh.triangle_coords(tri), pts)  # (2 pts, 3)
        w = 0.5 * mesh.edge_lengths[e]
        for j in range(3):
            for c in range(2):
                d = space.local_dofs[tri, j, c]
                if d >= 0:
                    F[d] += w * np.dot(gvals[:, c], traces[:, j])
    return F


def friction_value(space: CRSpace, g_a: float, v: CRFunction) -> float:
    """Friction functional: sum over contact edges of g_a h_e |v_tau(m_e)|."""
    tau = v.tangential_contact_values()
    return float(g_a * np.dot(space.contact_edge_lengths, np.abs(tau)))


def friction_rhs(space: CRSpace, g_a: float, lam: np.ndarray) -> np.ndarray:
    """Uzawa coupling vector: g_a h_e lambda_e at each tangential contact DOF.

    This vector is subtracted from the load in the Uzawa linear solve.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(space.contact_edges),):
        raise AssemblyError(
            f"expected one multiplier per contact edge ({len(space.contact_edges)}), got {lam.shape}")
    if np.any(np.abs(lam) > 1.0 + 1e-12):
        raise AssemblyError("friction multiplier out of [-1, 1]")
    out = np.zeros(space.n_dofs_free)
    out[space.contact_tangent_dof] = g_a * space.contact_edge_lengths * lam
    return out
