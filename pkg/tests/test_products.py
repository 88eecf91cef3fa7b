"""Inner product matrices: definiteness and cross-checks."""

import numpy as np
import pytest

from swellrom.errors import ShapeMismatch
from swellrom.fem_core import FormAssembler, inner_product_matrix
from swellrom.fem_core.products import KINDS


@pytest.fixture(scope="module")
def asm(coarse_mesh):
    return FormAssembler(coarse_mesh)


@pytest.mark.parametrize("kind", KINDS)
def test_matrix_is_spd(asm, kind):
    ip = inner_product_matrix(asm, kind)
    dense = ip.matrix.toarray()
    assert np.abs(dense - dense.T).max() < 1e-14
    eigs = np.linalg.eigvalsh(dense)
    assert eigs.min() > 0.0


def test_vector_product_acts_componentwise(asm):
    scalar = inner_product_matrix(asm, "H1-scalar")
    vector = inner_product_matrix(asm, "H1-vector")
    rng = np.random.default_rng(3)
    a = rng.standard_normal(scalar.dim)
    b = rng.standard_normal(scalar.dim)
    interleaved = np.empty(vector.dim)
    interleaved[0::2] = a
    interleaved[1::2] = b
    expect = scalar.inner(a, a) + scalar.inner(b, b)
    assert abs(vector.inner(interleaved, interleaved) - expect) < 1e-12 * abs(expect)


def test_boundary_product_matches_unit_coefficient_form(asm):
    ip = inner_product_matrix(asm, "L2-boundary-vector")
    n = asm.mesh.n_boundary * asm.quad.n_edge
    direct = asm.assemble("a1", np.ones(n))
    assert abs(ip.matrix - direct).max() < 1e-14


def test_norm_squares_the_inner_product(asm):
    ip = inner_product_matrix(asm, "H1-scalar")
    rng = np.random.default_rng(9)
    u = rng.standard_normal(ip.dim)
    assert abs(ip.norm(u) ** 2 - ip.inner(u, u)) < 1e-12 * ip.inner(u, u)


def test_gram_of_columns(asm):
    ip = inner_product_matrix(asm, "H1-scalar")
    rng = np.random.default_rng(2)
    v = rng.standard_normal((ip.dim, 3))
    g = ip.gram(v)
    for i in range(3):
        for j in range(3):
            assert abs(g[i, j] - ip.inner(v[:, i], v[:, j])) < 1e-12


def test_unknown_kind_rejected(asm):
    with pytest.raises(ShapeMismatch):
        inner_product_matrix(asm, "L3-exotic")
