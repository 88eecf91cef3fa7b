"""Assembly of the moving-domain forms on the fixed reference disk.

Every operator of the time stepper is an integral over the reference
mesh weighted by a coefficient field that encodes the current domain
shape.  The assembler is bound to one mesh and one quadrature table,
precomputes all affine geometry, and turns per-quadrature-point
coefficient samples into sparse matrices or load vectors.

Form identifiers and their coefficient sample layout:

========  =========  ====================  =====================
form id   domain     coefficient shape     assembled object
========  =========  ====================  =====================
``a1``    boundary   scalar                trace mass matrix
``a2``    boundary   2x2 tensor            trace stiffness matrix
``a3``    volume     scalar                mass matrix
``a4``    volume     2-vector              transport matrix
``a5``    volume     2x2 tensor            diffusion matrix
``l1``    boundary   2x2 tensor            tangent-derivative load
``l2``    boundary   2-vector              boundary load
========  =========  ====================  =====================

Volume samples are ordered cell-major (flat index = cell * nq + q) and
boundary samples edge-major (edge * nq_edge + q); tensor components are
flattened row-major.  Matrices follow the convention rows = test
functions, columns = trial functions.  In ``a4`` the gradient falls on
the test function, which is what makes the constant test function drop
out of the transport term and the scheme conserve total mass.

Boundary matrices and loads act on interleaved trace degrees of
freedom (slot 2*k + c for loop position k, component c).
"""

import numpy as np
import scipy.sparse as sp

from swellrom.errors import ShapeMismatch
from swellrom.fem_core.quadrature import default_quadrature

FORM_IDS = ("a1", "a2", "a3", "a4", "a5", "l1", "l2")

# (domain, components per sample point)
FORM_SAMPLE_LAYOUT = {
    "a1": ("boundary", 1),
    "a2": ("boundary", 4),
    "a3": ("volume", 1),
    "a4": ("volume", 2),
    "a5": ("volume", 4),
    "l1": ("boundary", 4),
    "l2": ("boundary", 2),
}


class FormAssembler:
    """Geometry cache plus form assembly for one mesh.

    Parameters
    ----------
    mesh : Mesh
    quad : QuadratureTable, optional
        Defaults to the package-wide table.  The same table must be
        used wherever coefficient fields are sampled for training.
    """

    def __init__(self, mesh, quad=None):
        self.mesh = mesh
        self.quad = default_quadrature() if quad is None else quad

        cells = mesh.cells
        p = mesh.vertices[cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        # 2 * cell area, positive by mesh invariant
        self.det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]

        # P1 barycentric gradients; the first one is minus the sum of the
        # others so constant fields annihilate exactly in floating point.
        g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / self.det[:, None]
        g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / self.det[:, None]
        self.grads = np.stack([-(g1 + g2), g1, g2], axis=1)  # (nc, 3, 2)

        bary = self.quad.tri_bary
        self.volume_points = np.einsum("qa,cak->cqk", bary, p).reshape(-1, 2)

        bedges = mesh.boundary_edges
        va = mesh.vertices[bedges[:, 0]]
        vb = mesh.vertices[bedges[:, 1]]
        seg = vb - va
        self.edge_length = np.linalg.norm(seg, axis=1)
        self.tangent = seg / self.edge_length[:, None]
        # boundary loop is counterclockwise, so this normal points outward
        self.normal = np.column_stack([self.tangent[:, 1], -self.tangent[:, 0]])
        s = self.quad.edge_points
        self.boundary_points = (
            va[:, None, :] * (1.0 - s)[None, :, None]
            + vb[:, None, :] * s[None, :, None]
        ).reshape(-1, 2)
        self.edge_adjacent_cell = _boundary_adjacency(cells, bedges)

        # scatter index arrays reused by every volume assembly
        self._vol_rows = np.broadcast_to(cells[:, :, None], (len(cells), 3, 3))
        self._vol_cols = np.broadcast_to(cells[:, None, :], (len(cells), 3, 3))

        nb = mesh.n_boundary
        loop_pos = np.arange(nb)
        ends = np.stack([loop_pos, (loop_pos + 1) % nb], axis=1)  # (nb, 2)
        # trace dofs of each edge: (nb, 2 vertices, 2 comps)
        self._trace_dofs = (2 * ends[:, :, None]
                            + np.arange(2)[None, None, :])

    @property
    def n_volume_samples(self):
        return self.mesh.n_cells * self.quad.n_tri

    @property
    def n_boundary_samples(self):
        return self.mesh.n_boundary * self.quad.n_edge

    def sample_points(self, form_id):
        domain, _ = FORM_SAMPLE_LAYOUT[form_id]
        return self.volume_points if domain == "volume" else self.boundary_points

    def _check_samples(self, form_id, samples):
        domain, d = FORM_SAMPLE_LAYOUT[form_id]
        n = self.n_volume_samples if domain == "volume" else self.n_boundary_samples
        arr = np.asarray(samples, dtype=np.float64)
        if arr.shape == (n,) and d == 1:
            pass
        elif arr.shape == (n, d):
            pass
        else:
            raise ShapeMismatch(
                f"form {form_id} wants {n} samples with {d} components, "
                f"got array of shape {arr.shape}"
            )
        nq = self.quad.n_tri if domain == "volume" else self.quad.n_edge
        return arr.reshape(-1, nq, d)

    def assemble(self, form_id, samples):
        """Assemble one form from coefficient samples at the quadrature points.

        Returns a CSR matrix for ``a*`` forms and a dense load vector
        for ``l*`` forms.
        """
        if form_id not in FORM_SAMPLE_LAYOUT:
            raise ShapeMismatch(f"unknown form id {form_id!r}")
        c = self._check_samples(form_id, samples)
        return getattr(self, "_" + form_id)(c)

    # volume forms ----------------------------------------------------

    def _a3(self, c):
        w = self.quad.tri_weights
        bary = self.quad.tri_bary
        loc = np.einsum("q,cq,qa,qb->cab", w, c[:, :, 0], bary, bary)
        loc *= self.det[:, None, None]
        return self._scatter_volume(loc)

    def _a4(self, c):
        w = self.quad.tri_weights
        bary = self.quad.tri_bary
        # row index a is the test function; its gradient meets the vector
        loc = np.einsum("q,cqi,cai,qb->cab", w, c, self.grads, bary)
        loc *= self.det[:, None, None]
        return self._scatter_volume(loc)

    def _a5(self, c):
        w = self.quad.tri_weights
        ct = c.reshape(c.shape[0], c.shape[1], 2, 2)
        loc = np.einsum("q,cqij,cai,cbj->cab", w, ct, self.grads, self.grads)
        loc *= self.det[:, None, None]
        return self._scatter_volume(loc)

    def _scatter_volume(self, loc):
        nv = self.mesh.n_vertices
        mat = sp.coo_matrix(
            (loc.reshape(-1), (self._vol_rows.reshape(-1), self._vol_cols.reshape(-1))),
            shape=(nv, nv),
        )
        return mat.tocsr()

    # boundary forms --------------------------------------------------

    def _a1(self, c):
        w = self.quad.edge_weights
        s = self.quad.edge_points
        phi = np.stack([1.0 - s, s], axis=1)  # (nq, 2 vertices)
        loc = np.einsum("q,eq,qa,qb->eab", w, c[:, :, 0], phi, phi)
        loc *= self.edge_length[:, None, None]
        # identical weight on both components of each vertex
        block = np.einsum("eab,ij->eaibj", loc, np.eye(2))
        return self._scatter_boundary(block)

    def _a2(self, c):
        w = self.quad.edge_weights
        ct = c.reshape(c.shape[0], c.shape[1], 2, 2)
        # loop derivatives are edgewise constant, so only the tangent
        # sandwich of the tensor survives the contraction
        tct = np.einsum("q,ei,eqij,ej->e", w, self.tangent, ct, self.tangent)
        sign = np.array([-1.0, 1.0])
        pattern = np.einsum("a,b,ij->aibj", sign, sign, np.eye(2))
        block = (tct / self.edge_length)[:, None, None, None, None] * pattern
        return self._scatter_boundary(block)

    def _l1(self, c):
        w = self.quad.edge_weights
        ct = c.reshape(c.shape[0], c.shape[1], 2, 2)
        # edge length cancels against the constant loop derivative
        ctang = np.einsum("q,eqij,ej->ei", w, ct, self.tangent)
        vec = np.zeros(2 * self.mesh.n_boundary)
        np.add.at(vec, self._trace_dofs[:, 1, :].reshape(-1), ctang.reshape(-1))
        np.add.at(vec, self._trace_dofs[:, 0, :].reshape(-1), -ctang.reshape(-1))
        return vec

    def _l2(self, c):
        w = self.quad.edge_weights
        s = self.quad.edge_points
        phi = np.stack([1.0 - s, s], axis=1)
        loc = np.einsum("q,eqi,qa->eai", w, c, phi)
        loc *= self.edge_length[:, None, None]
        vec = np.zeros(2 * self.mesh.n_boundary)
        np.add.at(vec, self._trace_dofs.reshape(-1), loc.reshape(-1))
        return vec

    def _scatter_boundary(self, block):
        nb = self.mesh.n_boundary
        dofs = self._trace_dofs  # (nb, 2, 2)
        rows = np.broadcast_to(dofs[:, :, :, None, None], block.shape)
        cols = np.broadcast_to(dofs[:, None, None, :, :], block.shape)
        mat = sp.coo_matrix(
            (block.reshape(-1), (rows.reshape(-1), cols.reshape(-1))),
            shape=(2 * nb, 2 * nb),
        )
        return mat.tocsr()

    # helper operators ------------------------------------------------

    def extension_stiffness(self):
        """Stiffness of the symmetric-gradient harmonic extension.

        Weak form of -div[ h^-1 (grad q + grad q^T) ] = 0 with the
        inverse local mesh size as cell weight.  Acts on interleaved
        vector dofs over the whole mesh.
        """
        area = 0.5 * self.det
        wgt = area / self.mesh.cell_size
        gg = np.einsum("cai,cbi->cab", self.grads, self.grads)
        eye = np.eye(2)
        loc = np.einsum("c,cab,ij->caibj", wgt, gg, eye)
        loc += np.einsum("c,caj,cbi->caibj", wgt, self.grads, self.grads)
        cells = self.mesh.cells
        dofs = 2 * cells[:, :, None] + np.arange(2)[None, None, :]  # (nc, 3, 2)
        rows = np.broadcast_to(dofs[:, :, :, None, None], loc.shape)
        cols = np.broadcast_to(dofs[:, None, None, :, :], loc.shape)
        nv2 = 2 * self.mesh.n_vertices
        mat = sp.coo_matrix(
            (loc.reshape(-1), (rows.reshape(-1), cols.reshape(-1))),
            shape=(nv2, nv2),
        )
        return mat.tocsr()

    def scalar_mass(self):
        return self._a3(np.ones((self.mesh.n_cells, self.quad.n_tri, 1)))

    def scalar_stiffness(self):
        eye = np.broadcast_to(
            np.eye(2).reshape(1, 1, 4),
            (self.mesh.n_cells, self.quad.n_tri, 4),
        )
        return self._a5(np.ascontiguousarray(eye))

    def boundary_vector_mass(self):
        return self._a1(np.ones((self.mesh.n_boundary, self.quad.n_edge, 1)))


def _boundary_adjacency(cells, bedges):
    """For each boundary edge, the index of its unique adjacent cell."""
    edge_map = {}
    for ci, (v0, v1, v2) in enumerate(cells):
        for a, b in ((v0, v1), (v1, v2), (v2, v0)):
            key = (a, b) if a < b else (b, a)
            edge_map[key] = ci
    adj = np.empty(len(bedges), dtype=np.int64)
    for ei, (a, b) in enumerate(bedges):
        key = (a, b) if a < b else (b, a)
        adj[ei] = edge_map[key]
    return adj
