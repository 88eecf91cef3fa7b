"""Coefficient-driven form assembly against independent references."""

import numpy as np
import pytest
import scipy.sparse as sp

from swellrom.ale_geometry import transform_quantities
from swellrom.fem_core import FormAssembler, interpolate
from swellrom.fem_core.assembly import FORM_SAMPLE_LAYOUT
from swellrom.fem_core.fields import trace_dof_indices


@pytest.fixture(scope="module")
def asm(coarse_mesh):
    return FormAssembler(coarse_mesh)


def _polygon_area(mesh):
    tri = mesh.vertices[mesh.cells]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    return 0.5 * np.sum(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _perimeter(mesh):
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    return np.linalg.norm(b - a, axis=1).sum()


def _sample_count(asm, form_id):
    domain, _ = FORM_SAMPLE_LAYOUT[form_id]
    if domain == "volume":
        return len(asm.mesh.cells) * asm.quad.n_tri
    return len(asm.mesh.boundary_edges) * asm.quad.n_edge


def test_weighted_mass_with_unit_coefficient(asm):
    mass = asm.assemble("a3", np.ones(_sample_count(asm, "a3")))
    direct = asm.scalar_mass()
    assert abs(mass - direct).max() < 1e-14
    area = _polygon_area(asm.mesh)
    assert abs(mass.sum() - area) < 1e-12 * area


def test_weighted_diffusion_with_identity_coefficient(asm):
    n = _sample_count(asm, "a5")
    samples = np.tile(np.eye(2).reshape(-1), (n, 1))
    stiff = asm.assemble("a5", samples)
    direct = asm.scalar_stiffness()
    assert abs(stiff - direct).max() < 1e-12


@pytest.mark.parametrize("form_id", ["a1", "a2", "a3", "a4", "a5", "l1", "l2"])
def test_assembly_is_linear_in_samples(asm, form_id):
    # backbone of the interpolation decomposition
    rng = np.random.default_rng(11)
    _, d = FORM_SAMPLE_LAYOUT[form_id]
    shape = (_sample_count(asm, form_id), d) if d > 1 else (_sample_count(asm, form_id),)
    c1 = rng.standard_normal(shape)
    c2 = rng.standard_normal(shape)
    a_sum = asm.assemble(form_id, c1 + c2)
    a_parts = asm.assemble(form_id, c1) + asm.assemble(form_id, c2)
    if sp.issparse(a_sum):
        num = abs(a_sum - a_parts).max()
        den = abs(a_sum).max()
    else:
        num = np.abs(a_sum - a_parts).max()
        den = np.abs(a_sum).max()
    assert num <= 1e-12 * den


def test_transport_conserves_constants(asm):
    # constant test functions see no transport: column sums vanish
    rng = np.random.default_rng(4)
    samples = rng.standard_normal((_sample_count(asm, "a4"), 2))
    a4 = asm.assemble("a4", samples)
    col_sums = np.asarray(a4.sum(axis=0)).ravel()
    assert np.abs(col_sums).max() < 1e-14 * abs(a4).max()


def test_boundary_mass_with_unit_coefficient(asm):
    a1 = asm.assemble("a1", np.ones(_sample_count(asm, "a1")))
    direct = asm.boundary_vector_mass()
    assert abs(a1 - direct).max() < 1e-14
    # each scalar component integrates the trace: total = 2 * perimeter
    total = a1.sum()
    assert abs(total - 2.0 * _perimeter(asm.mesh)) < 1e-12


def test_tangential_stiffness_kills_constants(asm):
    n = _sample_count(asm, "a2")
    samples = np.tile(np.eye(2).reshape(-1), (n, 1))
    a2 = asm.assemble("a2", samples)
    nb = len(asm.mesh.boundary_vertices)
    const = np.tile([1.0, -2.0], nb)
    assert np.abs(a2 @ const).max() < 1e-12
    assert abs(a2 - a2.T).max() < 1e-14


def test_tangent_load_telescopes_around_loop(asm):
    # identity coefficient integrates pure tangent increments: closed loop sums to zero
    n = _sample_count(asm, "l1")
    samples = np.tile(np.eye(2).reshape(-1), (n, 1))
    l1 = asm.assemble("l1", samples)
    comps = l1.reshape(-1, 2)
    assert np.abs(comps.sum(axis=0)).max() < 1e-12


def test_normal_load_with_constant_field(asm):
    samples = np.tile([1.0, 0.0], (_sample_count(asm, "l2"), 1))
    l2 = asm.assemble("l2", samples)
    comps = l2.reshape(-1, 2)
    assert abs(comps[:, 0].sum() - _perimeter(asm.mesh)) < 1e-12
    assert np.abs(comps[:, 1]).max() < 1e-14


def test_extension_stiffness_spd_on_interior(asm):
    k = asm.extension_stiffness()
    assert abs(k - k.T).max() < 1e-12
    rng = np.random.default_rng(8)
    idx = trace_dof_indices(asm.mesh)
    for _ in range(5):
        v = rng.standard_normal(k.shape[0])
        v[idx] = 0.0  # interior directions only; rigid motions live on the trace
        assert v @ (k @ v) > 0.0


def test_transform_identity_quantities(asm, coarse_mesh):
    psi = interpolate(coarse_mesh, lambda p: p, n_components=2)
    tq = transform_quantities(asm, psi)
    assert np.allclose(tq.volume_factor, 1.0, atol=1e-13)
    assert np.allclose(tq.surface_factor, 1.0, atol=1e-13)
    nc = len(coarse_mesh.cells)
    assert np.allclose(tq.jacobian, np.tile(np.eye(2), (nc, 1, 1)), atol=1e-13)
    assert np.allclose(tq.unit_normal, asm.normal, atol=1e-12)


def test_transform_scaling_quantities(asm, coarse_mesh):
    s = 1.7
    psi = interpolate(coarse_mesh, lambda p: s * p, n_components=2)
    tq = transform_quantities(asm, psi)
    assert np.allclose(tq.volume_factor, s * s, rtol=1e-12)
    assert np.allclose(tq.surface_factor, s, rtol=1e-12)
