"""P1 fields: interpolation, interleaving, boundary traces."""

import numpy as np

from swellrom.fem_core import generate_disk_mesh, interpolate, interpolate_boundary
from swellrom.fem_core.fields import extract_trace, scatter_trace, trace_dof_indices


def test_affine_reproduction_at_barycenters(coarse_mesh):
    # P1 interpolation is exact for affine functions
    def f(points):
        return 2.0 * points[:, 0] - 3.0 * points[:, 1] + 0.5

    field = interpolate(coarse_mesh, f)
    tri = coarse_mesh.vertices[coarse_mesh.cells]
    centers = tri.mean(axis=1)
    values = field.coefficients[coarse_mesh.cells].mean(axis=1)
    assert np.abs(values - f(centers)).max() < 1e-12


def test_vector_interleaving(coarse_mesh):
    def f(points):
        return np.column_stack([points[:, 0], -points[:, 1]])

    field = interpolate(coarse_mesh, f, n_components=2)
    coeffs = field.coefficients.reshape(-1, 2)
    assert np.allclose(coeffs[:, 0], coarse_mesh.vertices[:, 0])
    assert np.allclose(coeffs[:, 1], -coarse_mesh.vertices[:, 1])


def test_trace_round_trip(coarse_mesh):
    from swellrom.fem_core import Field

    rng = np.random.default_rng(3)
    full = Field(coarse_mesh, rng.standard_normal(2 * coarse_mesh.n_vertices),
                 n_components=2)
    trace = extract_trace(full)
    scattered = scatter_trace(trace)
    idx = trace_dof_indices(coarse_mesh)
    assert np.array_equal(trace.coefficients, full.coefficients[idx])
    assert np.array_equal(scattered.coefficients[idx], trace.coefficients)
    mask = np.ones(full.coefficients.size, dtype=bool)
    mask[idx] = False
    assert np.all(scattered.coefficients[mask] == 0.0)


def test_boundary_interpolation_matches_volume(coarse_mesh):
    def f(points):
        return np.column_stack([points[:, 1], points[:, 0] ** 2])

    full = interpolate(coarse_mesh, f, n_components=2)
    trace = interpolate_boundary(coarse_mesh, f, n_components=2)
    assert np.allclose(trace.coefficients,
                       extract_trace(full).coefficients)
