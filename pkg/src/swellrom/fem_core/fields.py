"""Piecewise linear fields on a disk mesh and on its boundary loop.

Vector degrees of freedom are interleaved: component c of vertex v
lives at slot 2*v + c.  Boundary (trace) fields use the same layout
with the loop position replacing the vertex index, so slot 2*k + c
belongs to ``mesh.boundary_vertices[k]``.
"""

from dataclasses import dataclass

import numpy as np

from swellrom.errors import ShapeMismatch


@dataclass(frozen=True)
class Field:
    """Vertex-based P1 field over the whole mesh.

    Attributes
    ----------
    mesh : Mesh
    coefficients : ndarray
        Shape (nv,) for scalar fields, (2 nv,) interleaved for vector.
    n_components : int
    units : str
        Free-form physical annotation, not used in arithmetic.
    """

    mesh: object
    coefficients: np.ndarray
    n_components: int = 1
    units: str = ""

    def __post_init__(self):
        coeffs = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        expected = self.mesh.n_vertices * self.n_components
        if coeffs.shape != (expected,):
            raise ShapeMismatch(
                f"field needs {expected} coefficients, got {coeffs.shape}"
            )
        object.__setattr__(self, "coefficients", coeffs)

    def as_components(self):
        """View the coefficients as an (nv, n_components) array."""
        return self.coefficients.reshape(-1, self.n_components)

    def replace(self, coefficients):
        return Field(self.mesh, coefficients, self.n_components, self.units)


@dataclass(frozen=True)
class TraceField:
    """P1 field on the boundary loop only."""

    mesh: object
    coefficients: np.ndarray
    n_components: int = 1
    units: str = ""

    def __post_init__(self):
        coeffs = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        expected = self.mesh.n_boundary * self.n_components
        if coeffs.shape != (expected,):
            raise ShapeMismatch(
                f"trace field needs {expected} coefficients, got {coeffs.shape}"
            )
        object.__setattr__(self, "coefficients", coeffs)

    def as_components(self):
        return self.coefficients.reshape(-1, self.n_components)


def trace_dof_indices(mesh, n_components=2):
    """Full-mesh dof slots addressed by the boundary loop, in loop order.

    With the interleaved layout, trace slot k*n_components + c maps to
    full slot boundary_vertices[k]*n_components + c.
    """
    base = n_components * mesh.boundary_vertices[:, None]
    offs = np.arange(n_components)[None, :]
    return (base + offs).reshape(-1)


def extract_trace(field):
    """Restrict a full-mesh field to the boundary loop."""
    idx = trace_dof_indices(field.mesh, field.n_components)
    return TraceField(field.mesh, field.coefficients[idx],
                      field.n_components, field.units)


def scatter_trace(trace, fill=0.0):
    """Embed a trace field into a full-mesh field, zero elsewhere."""
    mesh = trace.mesh
    full = np.full(mesh.n_vertices * trace.n_components, fill, dtype=np.float64)
    idx = trace_dof_indices(mesh, trace.n_components)
    full[idx] = trace.coefficients
    return Field(mesh, full, trace.n_components, trace.units)


def _evaluate(func, points, n_components):
    vals = np.asarray(func(points), dtype=np.float64)
    n = points.shape[0]
    if n_components == 1:
        if vals.shape == (n,):
            return vals
        if vals.shape == (n, 1):
            return vals[:, 0]
    else:
        if vals.shape == (n, n_components):
            return vals.reshape(-1)
    raise ShapeMismatch(
        f"interpolation callable returned shape {vals.shape} for {n} points"
    )


def interpolate(mesh, func, n_components=1, units=""):
    """Vertex interpolant of a callable mapping (n, 2) points to values.

    The callable receives all vertex coordinates at once and must
    return (n,) for scalars or (n, n_components) for vector fields.
    """
    coeffs = _evaluate(func, mesh.vertices, n_components)
    return Field(mesh, coeffs, n_components, units)


def interpolate_boundary(mesh, func, n_components=2, units=""):
    """Boundary-loop interpolant, evaluated at the loop vertices in order."""
    points = mesh.vertices[mesh.boundary_vertices]
    coeffs = _evaluate(func, points, n_components)
    return TraceField(mesh, coeffs, n_components, units)
