"""Pullback geometry of a mesh deformation and its coefficient fields.

All integrals of the moving-domain problem are computed on the fixed
reference disk, weighted by quantities of the deformation map: its
Jacobian matrix F (constant per cell for P1 maps), the volume factor
J = det F, and along the boundary the stretched normal, the surface
Jacobian and the tangential projector of the deformed curve.

From these, seven coefficient fields feed the forms of
:mod:`swellrom.fem_core.assembly`:

====  =========  ===========================================
 id   form       coefficient
====  =========  ===========================================
  1   ``a1``     surface Jacobian
  2   ``a2``     surface Jacobian times pulled-back tangential metric
  3   ``a3``     volume Jacobian
  4   ``a4``     volume Jacobian times pulled-back domain velocity
  5   ``a5``     volume Jacobian times pulled-back diffusion metric
  6   ``l1``     surface Jacobian times pulled-back projector
  7   ``l2``     stretched outward normal times the concentration
====  =========  ===========================================

Coefficients 1, 2, 6 and 7 live at the boundary quadrature points,
the rest at the volume quadrature points, in the flat point ordering
of the assembler.
"""

from dataclasses import dataclass

import numpy as np

from swellrom.errors import DegenerateMapping, ShapeMismatch

# Jacobians at or below this threshold mean the map folded over.
DEGENERACY_TOL = 1e-12

FORM_OF_COEFFICIENT = {1: "a1", 2: "a2", 3: "a3", 4: "a4", 5: "a5", 6: "l1", 7: "l2"}

COEFFICIENT_LAYOUT = {
    1: ("boundary", 1),
    2: ("boundary", 4),
    3: ("volume", 1),
    4: ("volume", 2),
    5: ("volume", 4),
    6: ("boundary", 4),
    7: ("boundary", 2),
}


@dataclass(frozen=True)
class TransformQuantities:
    """Cellwise and edgewise geometry of one deformation state.

    Attributes
    ----------
    jacobian : ndarray, shape (nc, 2, 2)
        Deformation gradient F per cell.
    volume_factor : ndarray, shape (nc,)
        det F per cell, all above ``DEGENERACY_TOL``.
    adjugate : ndarray, shape (nc, 2, 2)
        adj F, so F^-1 = adj F / det F without divisions.
    surface_factor : ndarray, shape (nb,)
        Length of adj(F)^T n per boundary edge; equals the ratio of
        deformed to reference edge length measure.
    stretched_normal : ndarray, shape (nb, 2)
        adj(F)^T n per boundary edge (not normalised).
    unit_normal : ndarray, shape (nb, 2)
        Outward unit normal of the deformed curve.
    projector : ndarray, shape (nb, 2, 2)
        Orthogonal projector onto the deformed tangent direction.
    """

    jacobian: np.ndarray
    volume_factor: np.ndarray
    adjugate: np.ndarray
    surface_factor: np.ndarray
    stretched_normal: np.ndarray
    unit_normal: np.ndarray
    projector: np.ndarray


def _as_vector_coefficients(psi, n_vertices):
    coeffs = psi.coefficients if hasattr(psi, "coefficients") else np.asarray(psi)
    if coeffs.shape != (2 * n_vertices,):
        raise ShapeMismatch(
            f"deformation map needs {2 * n_vertices} coefficients, "
            f"got shape {coeffs.shape}"
        )
    return coeffs.reshape(-1, 2)


def transform_quantities(asm, psi):
    """Geometry of the P1 deformation ``psi`` on the assembler's mesh.

    Parameters
    ----------
    asm : FormAssembler
    psi : Field or ndarray
        Vector field holding the deformed vertex positions.

    Raises
    ------
    DegenerateMapping
        If any cell Jacobian determinant falls to ``DEGENERACY_TOL``
        or below.
    """
    mesh = asm.mesh
    pos = _as_vector_coefficients(psi, mesh.n_vertices)
    # F_ij = d psi_i / d x_j, constant per cell
    F = np.einsum("cai,caj->cij", pos[mesh.cells], asm.grads)
    J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    if np.min(J) <= DEGENERACY_TOL:
        bad = int(np.argmin(J))
        raise DegenerateMapping(
            f"deformation folds over on cell {bad} (det {J[bad]:.3e})"
        )
    adj = np.empty_like(F)
    adj[:, 0, 0] = F[:, 1, 1]
    adj[:, 0, 1] = -F[:, 0, 1]
    adj[:, 1, 0] = -F[:, 1, 0]
    adj[:, 1, 1] = F[:, 0, 0]

    badj = adj[asm.edge_adjacent_cell]
    stretched = np.einsum("eji,ej->ei", badj, asm.normal)
    surface = np.linalg.norm(stretched, axis=1)
    unit_n = stretched / surface[:, None]
    proj = np.eye(2)[None] - np.einsum("ei,ej->eij", unit_n, unit_n)
    return TransformQuantities(F, J, adj, surface, stretched, unit_n, proj)


def coefficient_samples(i, asm, tq, velocity=None, concentration=None):
    """Sample coefficient field ``i`` at the assembler's quadrature points.

    Parameters
    ----------
    i : int
        Coefficient id, 1 through 7.
    asm : FormAssembler
    tq : TransformQuantities
        Output of :func:`transform_quantities` for the current state.
    velocity : Field or ndarray, optional
        Extended domain velocity, required for coefficient 4.
    concentration : Field or ndarray, optional
        Bulk concentration, required for coefficient 7.

    Returns
    -------
    ndarray, shape (n_points, d)
        Flat cell-major / edge-major sample array matching the
        assembler's layout for the corresponding form.
    """
    if i not in COEFFICIENT_LAYOUT:
        raise ShapeMismatch(f"unknown coefficient id {i!r}")
    nq = asm.quad.n_tri
    nqb = asm.quad.n_edge
    J = tq.volume_factor
    adj = tq.adjugate

    if i == 1:
        return np.repeat(tq.surface_factor, nqb)[:, None]

    if i == 2:
        badj = adj[asm.edge_adjacent_cell]
        Jb = J[asm.edge_adjacent_cell]
        mat = np.einsum("eik,ekl,ejl->eij", badj, tq.projector, badj)
        mat *= (tq.surface_factor / Jb**2)[:, None, None]
        return np.repeat(mat.reshape(-1, 4), nqb, axis=0)

    if i == 3:
        return np.repeat(J, nq)[:, None]

    if i == 4:
        if velocity is None:
            raise ShapeMismatch("coefficient 4 needs the domain velocity")
        vel = _as_vector_coefficients(velocity, asm.mesh.n_vertices)
        vq = np.einsum("qa,caj->cqj", asm.quad.tri_bary, vel[asm.mesh.cells])
        c4 = np.einsum("cij,cqj->cqi", adj, vq)
        return c4.reshape(-1, 2)

    if i == 5:
        mat = np.einsum("cik,cjk->cij", adj, adj) / J[:, None, None]
        return np.repeat(mat.reshape(-1, 4), nq, axis=0)

    if i == 6:
        badj = adj[asm.edge_adjacent_cell]
        Jb = J[asm.edge_adjacent_cell]
        mat = np.einsum("eik,ekj->eij", badj, tq.projector)
        mat *= (tq.surface_factor / Jb)[:, None, None]
        return np.repeat(mat.reshape(-1, 4), nqb, axis=0)

    # i == 7
    if concentration is None:
        raise ShapeMismatch("coefficient 7 needs the concentration")
    u = concentration.coefficients if hasattr(concentration, "coefficients") \
        else np.asarray(concentration)
    if u.shape != (asm.mesh.n_vertices,):
        raise ShapeMismatch("concentration must be a scalar vertex field")
    Jb = J[asm.edge_adjacent_cell]
    ua = u[asm.mesh.boundary_edges[:, 0]]
    ub = u[asm.mesh.boundary_edges[:, 1]]
    s = asm.quad.edge_points
    uq = ua[:, None] * (1.0 - s)[None, :] + ub[:, None] * s[None, :]
    scale = tq.surface_factor / Jb  # length of the pulled-back normal
    c7 = (scale[:, None] * tq.stretched_normal)[:, None, :] * uq[:, :, None]
    return c7.reshape(-1, 2)
