"""Operator compression: Galerkin stacks, content tensors, slicing."""

import numpy as np
import pytest

from swellrom.fem_core import Field
from swellrom.reduction_offline import slice_model
from swellrom.reduction_offline.project import slice_operators
from swellrom.rom_online import RomSolver, RomState


def test_stacks_match_direct_projection(coarse_solver, coarse_master):
    ops = coarse_master.ops
    asm = coarse_solver.asm
    U_u = coarse_master.bases["concentration"].modes
    U_q = coarse_master.bases["boundary-velocity"].modes
    checks = [
        (3, "a3", ops.volume_mass_stack, U_u, False),
        (5, "a5", ops.diffusion_stack, U_u, True),
        (1, "a1", ops.boundary_mass_stack, U_q, False),
    ]
    for i, form, stack, U, zeroed in checks:
        eim = coarse_master.eims[i]
        d = eim.n_components
        for m in (0, eim.n_modes - 1):
            samples = eim.basis[:, m].reshape(-1, d)
            direct = U.T @ (asm.assemble(form, samples) @ U)
            if zeroed:
                direct[0, :] = 0.0  # constant test row is analytic zero
            scale = max(np.abs(direct).max(), 1.0)
            assert np.abs(stack[m] - direct).max() < 1e-12 * scale


def test_constant_row_zeroed(coarse_master):
    assert coarse_master.bases["concentration"].constant_included
    assert np.abs(coarse_master.ops.transport_stack[:, 0, :]).max() == 0.0
    assert np.abs(coarse_master.ops.diffusion_stack[:, 0, :]).max() == 0.0


def test_extension_map_columns(coarse_solver, coarse_master):
    ops = coarse_master.ops
    U_q = coarse_master.bases["boundary-velocity"].modes
    U_p = coarse_master.bases["deformation"].modes
    Mv = coarse_solver.product_h1_vector.matrix
    for k in (0, U_q.shape[1] - 1):
        lifted = coarse_solver.extension.extend(U_q[:, k])
        direct = U_p.T @ (Mv @ lifted)
        assert np.abs(ops.extension_map[:, k] - direct).max() < 1e-12


def test_content_constant_term(coarse_solver, coarse_master):
    # zero displacement: content row against the L2 mass of the disk
    ops = coarse_master.ops
    U_u = coarse_master.bases["concentration"].modes
    direct = U_u.T @ (coarse_solver.asm.scalar_mass() @ np.ones(U_u.shape[0]))
    assert np.abs(ops.mass_c0 - direct).max() < 1e-12


def test_one_norm_squares_to_disk_area(coarse_solver, coarse_master):
    # H1 norm of the constant one: gradient part drops out
    tri = coarse_solver.mesh.vertices[coarse_solver.mesh.cells]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    area = 0.5 * np.sum(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    assert coarse_master.ops.one_norm**2 == pytest.approx(area, rel=1e-12)


def _random_state(master, rng, amp=0.05):
    dims = master.ops.dims()
    a = amp * rng.standard_normal(dims["Kpsi"])
    b = rng.standard_normal(dims["Ku"])
    return RomState(0, 0.0, b, a)


def test_content_row_matches_full_integral(coarse_solver, coarse_master):
    rom = RomSolver(coarse_master)
    rng = np.random.default_rng(17)
    for _ in range(3):
        state = _random_state(coarse_master, rng)
        u, psi = rom.reconstruct(state)
        full = coarse_solver.total_mass(u, psi)
        reduced = rom.total_mass(state)
        assert reduced == pytest.approx(full, rel=1e-10)


def test_variance_matches_full_integral(coarse_solver, coarse_master):
    rom = RomSolver(coarse_master)
    rng = np.random.default_rng(23)
    for _ in range(3):
        state = _random_state(coarse_master, rng)
        u, psi = rom.reconstruct(state)
        full = coarse_solver.variance(u, psi)
        reduced = rom.variance(state)
        assert reduced == pytest.approx(full, rel=1e-9, abs=1e-13)


def test_slice_keeps_prefixes(coarse_master):
    ops = coarse_master.ops
    dims = ops.dims()
    kq = max(dims["Kq"] - 1, 1)
    kp = max(dims["Kpsi"] - 1, 1)
    ku = max(dims["Ku"] - 1, 1)
    keep_m = {i: max(e.n_modes - 1, 1) for i, e in coarse_master.eims.items()}
    cut = slice_operators(ops, kq, kp, ku, keep_m)
    assert cut.dims() == {"Kq": kq, "Kpsi": kp, "Ku": ku}
    assert np.array_equal(
        cut.volume_mass_stack, ops.volume_mass_stack[: keep_m[3], :ku, :ku]
    )
    assert np.array_equal(cut.extension_map, ops.extension_map[:kp, :kq])
    assert np.array_equal(cut.mass_c2, ops.mass_c2[:ku, :kp, :kp])
    for i, entry in cut.point_geometry.items():
        m = keep_m[i]
        assert entry["mode_grads"].shape[:2] == (m, kp)
        assert entry["mode_grads"].flags["C_CONTIGUOUS"]


def test_sliced_model_dims_consistent(coarse_master):
    loose = slice_model(coarse_master, 1e-2, 1e-3)
    dims = loose.dims()
    assert dims["Ku"] == loose.bases["concentration"].n_modes
    assert dims["Kq"] == loose.bases["boundary-velocity"].n_modes
    assert dims["Kpsi"] == loose.bases["deformation"].n_modes
    for i, eim in loose.eims.items():
        assert dims[f"M{i}"] == eim.n_modes
        assert eim.n_modes <= coarse_master.eims[i].n_modes
    assert dims["Ku"] <= coarse_master.dims()["Ku"]
