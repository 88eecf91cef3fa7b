"""Projection of the assembled operators onto the reduced spaces.

For every interpolation basis vector of every coefficient, the
corresponding form is assembled once and compressed against the
reduced bases, leaving stacks of small dense matrices whose online
combination needs nothing of the full mesh.

Beyond the Galerkin stacks this module prepares three extras:

* the reduced harmonic extension (boundary velocity modes to
  deformation modes),
* polynomial tensors for the exact solute content of a reduced state:
  for piecewise linear deformations the cell Jacobian is a quadratic
  polynomial in the deformation coefficients, so the content row is
  expressible exactly by degree-0/1/2 tensors,
* the same construction against products of concentration modes for
  the exact spatial variance (optional, the quartic tensor can get
  large for big bases),
* per-interpolation-point geometry (mode gradients, reference normals,
  mode point values) from which the online phase reconstructs the
  coefficient values at the magic points.

The leading concentration mode is the normalised constant, so the
transport and diffusion stacks have an analytically zero first row;
it is zeroed explicitly to remove assembly roundoff.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from swellrom.ale_geometry import FORM_OF_COEFFICIENT
from swellrom.errors import DimensionMismatch

# cells per chunk in the polynomial tensor accumulation
_CHUNK = 2048


@dataclass(frozen=True)
class ReducedOperators:
    """Everything the online phase needs, all dense and small."""

    # Galerkin stacks, one slab per interpolation mode
    boundary_mass_stack: np.ndarray      # (M1, Kq, Kq)
    boundary_stiffness_stack: np.ndarray  # (M2, Kq, Kq)
    volume_mass_stack: np.ndarray        # (M3, Ku, Ku)
    transport_stack: np.ndarray          # (M4, Ku, Ku)
    diffusion_stack: np.ndarray          # (M5, Ku, Ku)
    tangent_load_stack: np.ndarray       # (M6, Kq)
    normal_load_stack: np.ndarray        # (M7, Kq)
    # maps between reduced spaces
    extension_map: np.ndarray            # (Kpsi, Kq)
    initial_concentration: np.ndarray    # (Ku,)
    shape_offsets: np.ndarray            # (Kpsi, n_shapes)
    one_norm: float
    # exact content row: row(a) = c0 + c1 a + (a . c2 a)
    mass_c0: np.ndarray                  # (Ku,)
    mass_c1: np.ndarray                  # (Ku, Kpsi)
    mass_c2: np.ndarray                  # (Ku, Kpsi, Kpsi)
    # exact pairwise content for the variance, may be skipped
    var_c0: Optional[np.ndarray]         # (Ku, Ku)
    var_c1: Optional[np.ndarray]         # (Ku, Ku, Kpsi)
    var_c2: Optional[np.ndarray]         # (Ku, Ku, Kpsi, Kpsi)
    # online geometry at the interpolation points, keyed by coefficient
    point_geometry: dict

    def dims(self):
        return {
            "Kq": self.boundary_mass_stack.shape[1],
            "Kpsi": self.extension_map.shape[0],
            "Ku": self.volume_mass_stack.shape[1],
        }


def _project_matrix(op, left, right):
    return left.T @ (op @ right)


def _stack_for(asm, eim, left, right):
    form = FORM_OF_COEFFICIENT[eim.coefficient_id]
    d = eim.n_components
    out = np.empty((eim.n_modes, left.shape[1], right.shape[1]))
    for m in range(eim.n_modes):
        samples = eim.basis[:, m].reshape(-1, d)
        out[m] = _project_matrix(asm.assemble(form, samples), left, right)
    return out


def _load_stack_for(asm, eim, test):
    form = FORM_OF_COEFFICIENT[eim.coefficient_id]
    d = eim.n_components
    out = np.empty((eim.n_modes, test.shape[1]))
    for m in range(eim.n_modes):
        samples = eim.basis[:, m].reshape(-1, d)
        out[m] = test.T @ asm.assemble(form, samples)
    return out


def _mode_gradients(asm, modes_psi, cell_idx):
    """Deformation-mode gradients on the given cells, (n, K, 2, 2).

    Contiguous so online einsum paths match a reloaded archive bitwise.
    """
    mesh = asm.mesh
    K = modes_psi.shape[1]
    W = modes_psi.reshape(mesh.n_vertices, 2, K)
    Wc = W[mesh.cells[cell_idx]]            # (n, 3, 2, K)
    grads = np.einsum("maik,maj->mkij", Wc, asm.grads[cell_idx])
    return np.ascontiguousarray(grads)


def _point_geometry(asm, eims, modes_psi, modes_u):
    """Per-coefficient geometry at the interpolation points."""
    mesh = asm.mesh
    nq = asm.quad.n_tri
    nqb = asm.quad.n_edge
    geo = {}
    for i, eim in eims.items():
        pts = eim.pairs[:, 0]
        entry = {}
        if eim.domain == "volume":
            cell_idx = pts // nq
            qidx = pts % nq
            entry["mode_grads"] = _mode_gradients(asm, modes_psi, cell_idx)
            if i == 4:
                W = modes_psi.reshape(mesh.n_vertices, 2, -1)
                Wc = W[mesh.cells[cell_idx]]  # (M, 3, 2, K)
                bary = asm.quad.tri_bary[qidx]  # (M, 3)
                entry["mode_values"] = np.ascontiguousarray(
                    np.einsum("ma,maik->mki", bary, Wc))
        else:
            edge_idx = pts // nqb
            qidx = pts % nqb
            cell_idx = asm.edge_adjacent_cell[edge_idx]
            entry["mode_grads"] = _mode_gradients(asm, modes_psi, cell_idx)
            entry["ref_normal"] = asm.normal[edge_idx].copy()
            if i == 7:
                s = asm.quad.edge_points[qidx]
                va = mesh.boundary_edges[edge_idx, 0]
                vb = mesh.boundary_edges[edge_idx, 1]
                entry["conc_values"] = (
                    modes_u[va] * (1.0 - s)[:, None]
                    + modes_u[vb] * s[:, None]
                )
        geo[i] = entry
    return geo


def _content_tensors(asm, modes_u, modes_psi, with_variance):
    """Exact polynomial tensors of solute content and pairwise content.

    The cell Jacobian of identity-plus-displacement is
    1 + a.div + a.D a with cellwise constant mode gradients, and the
    concentration factors are integrated exactly by the P1 vertex
    weights, so no quadrature error enters.
    """
    mesh = asm.mesh
    Ku = modes_u.shape[1]
    Kp = modes_psi.shape[1]
    c0 = np.zeros(Ku)
    c1 = np.zeros((Ku, Kp))
    c2 = np.zeros((Ku, Kp, Kp))
    v0 = np.zeros((Ku, Ku)) if with_variance else None
    v1 = np.zeros((Ku, Ku, Kp)) if with_variance else None
    v2 = np.zeros((Ku, Ku, Kp, Kp)) if with_variance else None

    for lo in range(0, mesh.n_cells, _CHUNK):
        hi = min(lo + _CHUNK, mesh.n_cells)
        idx = np.arange(lo, hi)
        det = asm.det[idx]
        G = _mode_gradients(asm, modes_psi, idx)   # (n, Kp, 2, 2)
        divw = G[:, :, 0, 0] + G[:, :, 1, 1]
        # bilinear determinant kernel; only its symmetric part matters
        # because it is always contracted with a twice
        D2 = (np.einsum("mk,ml->mkl", G[:, :, 0, 0], G[:, :, 1, 1])
              - np.einsum("mk,ml->mkl", G[:, :, 0, 1], G[:, :, 1, 0]))
        Uc = modes_u[mesh.cells[idx]]              # (n, 3, Ku)
        int_phi = (det[:, None] / 6.0) * Uc.sum(axis=1)
        c0 += int_phi.sum(axis=0)
        c1 += np.einsum("mj,mk->jk", int_phi, divw)
        c2 += np.einsum("mj,mkl->jkl", int_phi, D2)
        if with_variance:
            ssum = Uc.sum(axis=1)                  # (n, Ku)
            pair = np.einsum("mj,ml->mjl", ssum, ssum)
            pair += np.einsum("maj,mal->mjl", Uc, Uc)
            pair *= (det / 24.0)[:, None, None]
            v0 += pair.sum(axis=0)
            v1 += np.einsum("mjl,mk->jlk", pair, divw)
            v2 += np.einsum("mjl,mkd->jlkd", pair, D2)
    return c0, c1, c2, v0, v1, v2


def project_operators(solver, bases, eims, with_variance=True):
    """Compress all operators against the given bases.

    Parameters
    ----------
    solver : FomSolver
    bases : dict
        Keys ``"boundary-velocity"``, ``"deformation"``,
        ``"concentration"`` mapping to :class:`ReducedBasis`.
    eims : dict
        Coefficient id to :class:`EimData`, all seven present.
    with_variance : bool
        Build the quartic variance tensors too.
    """
    asm = solver.asm
    U_q = bases["boundary-velocity"].modes
    U_p = bases["deformation"].modes
    U_u = bases["concentration"].modes
    missing = sorted(set(range(1, 8)) - set(eims))
    if missing:
        raise DimensionMismatch(f"missing interpolation data for {missing}")

    transport = _stack_for(asm, eims[4], U_u, U_u)
    diffusion = _stack_for(asm, eims[5], U_u, U_u)
    if bases["concentration"].constant_included:
        # constant test function: analytically zero rows
        transport[:, 0, :] = 0.0
        diffusion[:, 0, :] = 0.0

    ext_fields = np.column_stack(
        [solver.extension.extend(U_q[:, k]) for k in range(U_q.shape[1])]
    ) if U_q.shape[1] else np.zeros((2 * asm.mesh.n_vertices, 0))
    Mv = solver.product_h1_vector.matrix
    extension_map = U_p.T @ (Mv @ ext_fields)

    ones = np.ones(asm.mesh.n_vertices)
    Ms = solver.product_h1.matrix
    initial_concentration = U_u.T @ (Ms @ ones)
    shape_offsets = U_p.T @ (Mv @ np.column_stack(solver.shape_extensions))
    one_norm = float(np.sqrt(ones @ (Ms @ ones)))

    c0, c1, c2, v0, v1, v2 = _content_tensors(asm, U_u, U_p, with_variance)

    return ReducedOperators(
        boundary_mass_stack=_stack_for(asm, eims[1], U_q, U_q),
        boundary_stiffness_stack=_stack_for(asm, eims[2], U_q, U_q),
        volume_mass_stack=_stack_for(asm, eims[3], U_u, U_u),
        transport_stack=transport,
        diffusion_stack=diffusion,
        tangent_load_stack=_load_stack_for(asm, eims[6], U_q),
        normal_load_stack=_load_stack_for(asm, eims[7], U_q),
        extension_map=extension_map,
        initial_concentration=initial_concentration,
        shape_offsets=shape_offsets,
        one_norm=one_norm,
        mass_c0=c0,
        mass_c1=c1,
        mass_c2=c2,
        var_c0=v0,
        var_c1=v1,
        var_c2=v2,
        point_geometry=_point_geometry(asm, eims, U_p, U_u),
    )


def slice_operators(ops, keep_q, keep_p, keep_u, keep_m):
    """Truncate every reduced array to prefix dimensions.

    ``keep_m`` maps coefficient id to the interpolation mode count.
    Valid because reduced bases and greedy interpolation bases are both
    ordered: a tighter model's arrays are literal prefixes of a looser
    model's.
    """
    def cut(a):
        return np.ascontiguousarray(a)

    def cut_geo(i, entry):
        out = {}
        m = keep_m[i]
        out["mode_grads"] = cut(entry["mode_grads"][:m, :keep_p])
        if "mode_values" in entry:
            out["mode_values"] = cut(entry["mode_values"][:m, :keep_p])
        if "ref_normal" in entry:
            out["ref_normal"] = cut(entry["ref_normal"][:m])
        if "conc_values" in entry:
            out["conc_values"] = cut(entry["conc_values"][:m, :keep_u])
        return out

    return replace(
        ops,
        boundary_mass_stack=cut(ops.boundary_mass_stack[:keep_m[1], :keep_q, :keep_q]),
        boundary_stiffness_stack=cut(ops.boundary_stiffness_stack[:keep_m[2], :keep_q, :keep_q]),
        volume_mass_stack=cut(ops.volume_mass_stack[:keep_m[3], :keep_u, :keep_u]),
        transport_stack=cut(ops.transport_stack[:keep_m[4], :keep_u, :keep_u]),
        diffusion_stack=cut(ops.diffusion_stack[:keep_m[5], :keep_u, :keep_u]),
        tangent_load_stack=cut(ops.tangent_load_stack[:keep_m[6], :keep_q]),
        normal_load_stack=cut(ops.normal_load_stack[:keep_m[7], :keep_q]),
        extension_map=cut(ops.extension_map[:keep_p, :keep_q]),
        initial_concentration=cut(ops.initial_concentration[:keep_u]),
        shape_offsets=cut(ops.shape_offsets[:keep_p]),
        mass_c0=cut(ops.mass_c0[:keep_u]),
        mass_c1=cut(ops.mass_c1[:keep_u, :keep_p]),
        mass_c2=cut(ops.mass_c2[:keep_u, :keep_p, :keep_p]),
        var_c0=None if ops.var_c0 is None else cut(ops.var_c0[:keep_u, :keep_u]),
        var_c1=None if ops.var_c1 is None else
        cut(ops.var_c1[:keep_u, :keep_u, :keep_p]),
        var_c2=None if ops.var_c2 is None else
        cut(ops.var_c2[:keep_u, :keep_u, :keep_p, :keep_p]),
        point_geometry={i: cut_geo(i, e) for i, e in ops.point_geometry.items()},
    )
