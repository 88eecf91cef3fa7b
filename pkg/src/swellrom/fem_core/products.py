"""Inner products used for snapshot compression and error measurement.

Three kinds are supported:

``H1-scalar``
    Full H1 product (mass plus stiffness) on scalar fields.
``H1-vector``
    The same product applied componentwise to interleaved vector
    fields over the whole mesh.
``L2-boundary-vector``
    L2 product of vector trace fields along the boundary loop.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from swellrom.errors import ShapeMismatch
from swellrom.fem_core.assembly import FormAssembler

KINDS = ("H1-scalar", "H1-vector", "L2-boundary-vector")


@dataclass(frozen=True)
class InnerProduct:
    """Symmetric positive definite Gram matrix with convenience methods."""

    kind: str
    matrix: sp.csr_matrix

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, vecs):
        return self.matrix @ vecs

    def inner(self, u, v):
        return float(u @ (self.matrix @ v))

    def norm(self, u):
        val = self.inner(u, u)
        # tiny negative values can appear at roundoff level
        return float(np.sqrt(max(val, 0.0)))

    def gram(self, vecs):
        """Gram matrix of the columns of ``vecs``."""
        return vecs.T @ (self.matrix @ vecs)


def inner_product_matrix(source, kind, quad=None):
    """Build one of the supported inner products.

    Parameters
    ----------
    source : Mesh or FormAssembler
        Passing an assembler reuses its cached geometry.
    kind : str
        One of ``KINDS``.
    """
    if isinstance(source, FormAssembler):
        asm = source
    else:
        asm = FormAssembler(source, quad)
    if kind == "H1-scalar":
        mat = (asm.scalar_mass() + asm.scalar_stiffness()).tocsr()
    elif kind == "H1-vector":
        scalar = asm.scalar_mass() + asm.scalar_stiffness()
        mat = sp.kron(scalar, sp.identity(2, format="csr"), format="csr")
    elif kind == "L2-boundary-vector":
        mat = asm.boundary_vector_mass()
    else:
        raise ShapeMismatch(f"unknown inner product kind {kind!r}")
    return InnerProduct(kind, mat)
