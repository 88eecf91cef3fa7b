"""Online reduced solver.

Mirrors the four-phase full-order step on reduced coordinates: the
geometry coefficients are reconstructed only at the interpolation
points from stored mode gradients (cost independent of the mesh), the
interpolation weights come from one forward substitution per
coefficient, and the dense reduced systems are a few dozen unknowns.

Two concentration updates are available.  The plain Galerkin update
inherits a mass drift on the order of the interpolation error.  The
conservative update replaces the equation row tested by the constant
mode with the exact solute content row, a polynomial in the reduced
deformation coordinates, which makes the content telescope across
steps to solver precision while every other row stays Galerkin.

Blowups are not papered over, but grazing contact is not a blowup:
near strong swelling the exact map itself squeezes cells to tiny
positive determinants, so the approximated determinant at an isolated
interpolation point may transiently dip below zero and the coefficient
algebra simply flows through it.  A decisively inverted map, a
non-finite interpolation weight, or a singular reduced system aborts
the trajectory with a diagnostic carrying the completed prefix.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from swellrom.errors import (
    ConfigError,
    DegenerateMapping,
    DimensionMismatch,
    NonFiniteTheta,
    SingularReducedSystem,
    SolverFailure,
)
from swellrom.fem_core.fields import Field

TIMING_PHASES = (
    "coefficient_seconds",
    "boundary_solve_seconds",
    "extension_seconds",
    "concentration_solve_seconds",
)

# sampled determinant at or below this aborts the trajectory: the unit
# reference cell is then fully inverted, past any grazing sign dip
FOLD_ABORT_DET = -1.0


@dataclass(frozen=True)
class RomState:
    index: int
    time: float
    concentration: np.ndarray        # (Ku,)
    deformation: np.ndarray          # (Kpsi,), displacement coordinates
    boundary_velocity: Optional[np.ndarray] = None  # (Kq,)


@dataclass
class RomTrajectory:
    parameters: object
    dt: float
    states: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def n_steps(self):
        return len(self.states) - 1


class RomSolver:
    """Time stepper over one reduced model.

    Parameters
    ----------
    model : ReducedModel
    conservative : bool
        Use the exact-content row replacement in the concentration
        update.
    """

    def __init__(self, model, conservative=True):
        self.model = model
        self.ops = model.ops
        self.eims = model.eims
        self.conservative = conservative
        dims = self.ops.dims()
        self.n_q = dims["Kq"]
        self.n_psi = dims["Kpsi"]
        self.n_u = dims["Ku"]
        self._check_dimensions()
        self._eye = np.eye(2)
        # component selectors per coefficient
        self._comp = {i: e.pairs[:, 1] for i, e in self.eims.items()}

    def _check_dimensions(self):
        ops = self.ops
        stacks = {
            1: ops.boundary_mass_stack,
            2: ops.boundary_stiffness_stack,
            3: ops.volume_mass_stack,
            4: ops.transport_stack,
            5: ops.diffusion_stack,
            6: ops.tangent_load_stack,
            7: ops.normal_load_stack,
        }
        for i, stack in stacks.items():
            if stack.shape[0] != self.eims[i].n_modes:
                raise DimensionMismatch(
                    f"coefficient {i}: {self.eims[i].n_modes} interpolation "
                    f"modes but stack depth {stack.shape[0]}"
                )
            geo = ops.point_geometry[i]["mode_grads"]
            if geo.shape[0] != stack.shape[0] or geo.shape[1] != self.n_psi:
                raise DimensionMismatch(
                    f"coefficient {i}: point geometry shape {geo.shape} "
                    f"inconsistent with model dimensions"
                )
        if ops.extension_map.shape != (self.n_psi, self.n_q):
            raise DimensionMismatch("extension map has wrong shape")

    # coefficient reconstruction at the interpolation points ------------

    def _deformed_frames(self, i, a):
        geo = self.ops.point_geometry[i]
        F = self._eye + np.einsum("k,mkij->mij", a, geo["mode_grads"])
        J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
        if J.size and np.min(J) <= FOLD_ABORT_DET:
            bad = int(np.argmin(J))
            raise DegenerateMapping(
                f"reduced deformation folds over at interpolation point "
                f"{bad} of coefficient {i} (det {J[bad]:.3e})"
            )
        adj = np.empty_like(F)
        adj[:, 0, 0] = F[:, 1, 1]
        adj[:, 0, 1] = -F[:, 0, 1]
        adj[:, 1, 0] = -F[:, 1, 0]
        adj[:, 1, 1] = F[:, 0, 0]
        return F, J, adj

    def _theta(self, i, a, velocity=None, concentration=None, u_ext=0.0):
        """Interpolation weights of coefficient ``i`` at reduced state ``a``."""
        eim = self.eims[i]
        if eim.n_modes == 0:
            return np.zeros(0)
        geo = self.ops.point_geometry[i]
        comp = self._comp[i]
        rows = np.arange(eim.n_modes)
        _, J, adj = self._deformed_frames(i, a)

        if i == 3:
            vals = J
        elif i == 4:
            eta = np.einsum("k,mki->mi", velocity, geo["mode_values"])
            c = np.einsum("mij,mj->mi", adj, eta)
            vals = c[rows, comp]
        elif i == 5:
            c = np.einsum("mik,mjk->mij", adj, adj) / J[:, None, None]
            vals = c.reshape(-1, 4)[rows, comp]
        else:
            nref = geo["ref_normal"]
            v = np.einsum("mji,mj->mi", adj, nref)
            surf = np.linalg.norm(v, axis=1)
            if i == 1:
                vals = surf
            elif i == 7:
                upts = geo["conc_values"] @ concentration - u_ext
                c = (surf / J)[:, None] * v * upts[:, None]
                vals = c[rows, comp]
            else:
                unit = v / surf[:, None]
                proj = self._eye[None] - np.einsum("mi,mj->mij", unit, unit)
                if i == 2:
                    c = np.einsum("mik,mkl,mjl->mij", adj, proj, adj)
                    c *= (surf / J**2)[:, None, None]
                else:  # i == 6
                    c = np.einsum("mik,mkl->mil", adj, proj)
                    c *= (surf / J)[:, None, None]
                vals = c.reshape(-1, 4)[rows, comp]

        theta = solve_triangular(
            eim.collocation, vals, lower=True, unit_diagonal=True
        )
        if not np.all(np.isfinite(theta)):
            raise NonFiniteTheta(
                f"coefficient {i} produced non-finite interpolation weights"
            )
        return theta

    # state mechanics ----------------------------------------------------

    def initial_state(self, mu):
        a0 = self.ops.shape_offsets @ np.asarray(mu.deltas)
        u0 = self.ops.initial_concentration.copy()
        return RomState(0, 0.0, u0, a0)

    def content_row(self, a):
        """Coefficients of the exact solute content as a function of u."""
        ops = self.ops
        return ops.mass_c0 + ops.mass_c1 @ a + (ops.mass_c2 @ a) @ a

    def total_mass(self, state):
        """Exact solute content of a reduced state."""
        return float(self.content_row(state.deformation) @ state.concentration)

    def variance(self, state):
        """Exact spatial variance of a reduced state."""
        ops = self.ops
        if ops.var_c0 is None:
            raise ConfigError("model was built without variance tensors")
        a = state.deformation
        u = state.concentration
        Q = ops.var_c0 + ops.var_c1 @ a + (ops.var_c2 @ a) @ a
        volume = float(np.sum(Q[0, 0])) * ops.one_norm**2
        content = ops.one_norm * float(Q[0] @ u)
        mean = content / volume
        shifted = u.copy()
        shifted[0] -= mean * ops.one_norm
        return float(shifted @ Q @ shifted) / volume

    def reconstruct(self, state):
        """Lift a reduced state back to full vertex fields."""
        mesh = self.model.mesh
        U_u = self.model.bases["concentration"].modes
        U_p = self.model.bases["deformation"].modes
        u = Field(mesh, U_u @ state.concentration, 1, "concentration")
        psi = Field(
            mesh,
            mesh.vertices.reshape(-1) + U_p @ state.deformation,
            2,
            "length",
        )
        return u, psi

    def _boundary_velocity(self, a, u, mu, dt, timings):
        t0 = time.perf_counter()
        th1 = self._theta(1, a)
        th2 = self._theta(2, a)
        th6 = self._theta(6, a)
        th7 = self._theta(7, a, concentration=u, u_ext=mu.u_ext)
        timings["coefficient_seconds"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        system = np.einsum("m,mij->ij", th1, self.ops.boundary_mass_stack)
        system += mu.beta * dt * np.einsum(
            "m,mij->ij", th2, self.ops.boundary_stiffness_stack
        )
        rhs = mu.gamma * (th7 @ self.ops.normal_load_stack)
        rhs -= mu.beta * (th6 @ self.ops.tangent_load_stack)
        try:
            q = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularReducedSystem(f"boundary motion: {exc}") from exc
        if not np.all(np.isfinite(q)):
            raise SingularReducedSystem("boundary motion solution not finite")
        timings["boundary_solve_seconds"] += time.perf_counter() - t0
        return q

    def _mass_carry(self, a, timings):
        """Galerkin mass operator (and content row) at a deformation state."""
        t0 = time.perf_counter()
        th3 = self._theta(3, a)
        timings["coefficient_seconds"] += time.perf_counter() - t0
        galerkin = np.einsum("m,mjk->jk", th3, self.ops.volume_mass_stack)
        row = self.content_row(a) / self.ops.one_norm \
            if self.conservative else None
        return galerkin, row

    def step(self, state, mu, dt, carry, timings):
        """Advance one step; ``carry`` holds the previous shape's mass data."""
        a = state.deformation
        u = state.concentration
        q = self._boundary_velocity(a, u, mu, dt, timings)

        t0 = time.perf_counter()
        vel = self.ops.extension_map @ q
        a_new = a + dt * vel
        timings["extension_seconds"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        th4 = self._theta(4, a_new, velocity=vel)
        th5 = self._theta(5, a_new)
        timings["coefficient_seconds"] += time.perf_counter() - t0
        galerkin_new, row_new = self._mass_carry(a_new, timings)

        t0 = time.perf_counter()
        system = galerkin_new + dt * np.einsum(
            "m,mjk->jk", th4, self.ops.transport_stack
        )
        system += mu.alpha * dt * np.einsum(
            "m,mjk->jk", th5, self.ops.diffusion_stack
        )
        galerkin_prev, row_prev = carry
        rhs = galerkin_prev @ u
        if self.conservative:
            system[0] = row_new
            rhs[0] = row_prev @ u
        try:
            u_new = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularReducedSystem(f"concentration update: {exc}") from exc
        if not np.all(np.isfinite(u_new)):
            raise SingularReducedSystem("concentration solution not finite")
        timings["concentration_solve_seconds"] += time.perf_counter() - t0

        new_state = RomState(state.index + 1, state.time + dt, u_new, a_new)
        return new_state, (galerkin_new, row_new), q

    def solve(self, mu, n_steps, dt):
        """March the reduced system, mirroring the full trajectory layout.

        Raises the failing step's ``SolverFailure`` with the completed
        prefix attached as ``exc.partial``.
        """
        start = time.perf_counter()
        timings = {k: 0.0 for k in TIMING_PHASES}
        state = self.initial_state(mu)
        states = []
        try:
            carry = self._mass_carry(state.deformation, timings)
        except SolverFailure as exc:
            exc.partial = RomTrajectory(mu, dt, [], timings,
                                        time.perf_counter() - start)
            raise
        for n in range(n_steps):
            try:
                new_state, carry, q = self.step(state, mu, dt, carry, timings)
            except SolverFailure as exc:
                states.append(state)
                partial = RomTrajectory(mu, dt, states, timings,
                                        time.perf_counter() - start)
                wrapped = type(exc)(f"time step {n + 1}: {exc}")
                wrapped.partial = partial
                raise wrapped from exc
            states.append(
                RomState(state.index, state.time, state.concentration,
                         state.deformation, q)
            )
            state = new_state
        try:
            q = self._boundary_velocity(
                state.deformation, state.concentration, mu, dt, timings
            )
        except SolverFailure as exc:
            states.append(state)
            partial = RomTrajectory(mu, dt, states, timings,
                                    time.perf_counter() - start)
            wrapped = type(exc)(f"time step {n_steps}: {exc}")
            wrapped.partial = partial
            raise wrapped from exc
        states.append(
            RomState(state.index, state.time, state.concentration,
                     state.deformation, q)
        )
        return RomTrajectory(mu, dt, states, timings,
                             time.perf_counter() - start)
