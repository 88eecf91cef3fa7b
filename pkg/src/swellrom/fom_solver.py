"""Full-order time stepping for the coupled swelling problem.

One step from state n to n+1 does, in order:

1. solve the boundary-motion system on the current shape for the
   boundary velocity (curvature flow plus osmotic forcing, treated
   implicitly in the velocity),
2. extend that velocity harmonically into the bulk with a local
   mesh-size weighted symmetric gradient operator,
3. advance the deformation map explicitly with the extended velocity,
4. solve the conservative transport-diffusion system for the new
   concentration against the mass matrix of the previous shape.

Because the transport form puts the gradient on the test function, the
constant test function reduces the concentration system to an exact
discrete mass balance, so total solute content is conserved to solver
precision for every parameter and step size.
"""

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from swellrom.ale_geometry import coefficient_samples, transform_quantities
from swellrom.errors import ConfigError, SingularSystem, SolverFailure
from swellrom.fem_core.assembly import FormAssembler
from swellrom.fem_core.fields import (
    Field,
    TraceField,
    interpolate_boundary,
    trace_dof_indices,
)
from swellrom.fem_core.products import inner_product_matrix

# fixed physical constants of the study setup
GAMMA = 0.1
U_EXTERNAL = 0.0

DEFAULT_DT = 0.01
DEFAULT_T_FINAL = 1.0

ALPHA_RANGE = (0.1, 1.0)
BETA_RANGE = (0.001, 0.1)
DELTA_RANGE = (0.0, 1.0)

# backward error bound accepted from the sparse direct solves
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class ParameterVector:
    """Diffusivity, surface tension and the two initial-shape weights."""

    alpha: float
    beta: float
    delta1: float
    delta2: float
    gamma: float = GAMMA
    u_ext: float = U_EXTERNAL

    def __post_init__(self):
        checks = (
            ("alpha", self.alpha, ALPHA_RANGE),
            ("beta", self.beta, BETA_RANGE),
            ("delta1", self.delta1, DELTA_RANGE),
            ("delta2", self.delta2, DELTA_RANGE),
        )
        for name, value, (lo, hi) in checks:
            if not (lo <= value <= hi):
                raise ConfigError(
                    f"{name}={value!r} outside admissible range [{lo}, {hi}]"
                )

    @property
    def deltas(self):
        return (self.delta1, self.delta2)


def _polar_angle(points):
    return np.arctan2(points[:, 1], points[:, 0])


def bump_shape(points):
    """Radial displacement concentrated around the positive x axis."""
    theta = _polar_angle(points)
    return np.exp(-theta**2)[:, None] * points


def ripple_shape(points):
    """Ten-lobed radial ripple of amplitude 0.1."""
    theta = _polar_angle(points)
    return 0.1 * np.sin(10.0 * theta)[:, None] * points


DEFAULT_SHAPES = (bump_shape, ripple_shape)


@dataclass(frozen=True)
class FomState:
    """Solution snapshot at one time level.

    ``boundary_velocity`` and ``velocity`` hold the motion computed at
    this state (used to reach the next one); they are filled for every
    state of a trajectory including the last.
    """

    index: int
    time: float
    concentration: Field
    transform: Field
    boundary_velocity: Optional[TraceField] = None
    velocity: Optional[Field] = None


@dataclass
class Trajectory:
    parameters: ParameterVector
    dt: float
    states: list
    wall_time: float = 0.0

    @property
    def n_steps(self):
        return len(self.states) - 1


class _ExtensionOperator:
    """Factorized harmonic extension from the boundary loop to the bulk."""

    def __init__(self, asm):
        mesh = asm.mesh
        K = asm.extension_stiffness().tocsc()
        n = 2 * mesh.n_vertices
        bdofs = trace_dof_indices(mesh)
        mask = np.ones(n, dtype=bool)
        mask[bdofs] = False
        idofs = np.nonzero(mask)[0]
        self.bdofs = bdofs
        self.idofs = idofs
        self.n = n
        self.K_ii = K[idofs][:, idofs].tocsc()
        self.K_ib = K[idofs][:, bdofs].tocsc()
        self.solve = spla.factorized(self.K_ii)

    def extend(self, trace_coeffs):
        rhs = -(self.K_ib @ trace_coeffs)
        interior = self.solve(rhs)
        _check_residual(self.K_ii, interior, rhs, "velocity extension")
        full = np.empty(self.n)
        full[self.bdofs] = trace_coeffs
        full[self.idofs] = interior
        return full


def _check_residual(A, x, b, label):
    # normwise backward error of the direct solve
    num = np.linalg.norm(A @ x - b)
    den = np.linalg.norm(b) + np.sqrt(np.sum(A.data**2)) * np.linalg.norm(x)
    if den == 0.0:
        return
    if num / den > RESIDUAL_TOL:
        raise SingularSystem(
            f"{label} solve stalled at backward error {num / den:.3e}"
        )


class FomSolver:
    """Time stepper bound to one reference mesh.

    Parameters
    ----------
    mesh : Mesh
    quad : QuadratureTable, optional
    shapes : sequence of callables, optional
        Boundary displacement generators weighted by the shape
        parameters; defaults to :data:`DEFAULT_SHAPES`.
    """

    def __init__(self, mesh, quad=None, shapes=DEFAULT_SHAPES):
        self.mesh = mesh
        self.asm = FormAssembler(mesh, quad)
        self.shapes = tuple(shapes)
        self.product_h1 = inner_product_matrix(self.asm, "H1-scalar")
        self.product_h1_vector = inner_product_matrix(self.asm, "H1-vector")
        self.product_boundary = inner_product_matrix(self.asm, "L2-boundary-vector")
        self._extension = None
        self._shape_extensions = None
        self.identity_coefficients = mesh.vertices.reshape(-1).copy()

    # lazy heavy pieces ------------------------------------------------

    @property
    def extension(self):
        if self._extension is None:
            self._extension = _ExtensionOperator(self.asm)
        return self._extension

    @property
    def shape_extensions(self):
        """Bulk extensions of the boundary shape displacements, (2nv,) each."""
        if self._shape_extensions is None:
            exts = []
            for shape in self.shapes:
                trace = interpolate_boundary(self.mesh, shape, n_components=2)
                exts.append(self.extension.extend(trace.coefficients))
            self._shape_extensions = exts
        return self._shape_extensions

    # single-step operations --------------------------------------------

    def initial_state(self, mu):
        """Uniform unit concentration on the parameter-dependent shape."""
        u0 = Field(self.mesh, np.ones(self.mesh.n_vertices), 1, "concentration")
        coeffs = self.identity_coefficients.copy()
        for delta, ext in zip(mu.deltas, self.shape_extensions):
            coeffs = coeffs + delta * ext
        psi0 = Field(self.mesh, coeffs, 2, "length")
        return FomState(0, 0.0, u0, psi0)

    def boundary_velocity_step(self, psi, u, mu, dt, tq=None):
        """Implicit boundary-motion solve on the current shape."""
        if tq is None:
            tq = transform_quantities(self.asm, psi)
        A1 = self.asm.assemble("a1", coefficient_samples(1, self.asm, tq))
        A2 = self.asm.assemble("a2", coefficient_samples(2, self.asm, tq))
        shifted = u.coefficients - mu.u_ext
        load_t = self.asm.assemble("l1", coefficient_samples(6, self.asm, tq))
        load_n = self.asm.assemble(
            "l2", coefficient_samples(7, self.asm, tq, concentration=shifted)
        )
        system = (A1 + mu.beta * dt * A2).tocsc()
        rhs = -mu.beta * load_t + mu.gamma * load_n
        try:
            q = spla.spsolve(system, rhs)
        except RuntimeError as exc:
            raise SingularSystem(f"boundary motion solve failed: {exc}") from exc
        _check_residual(system, q, rhs, "boundary motion")
        return TraceField(self.mesh, q, 2, "length/time")

    def extend(self, boundary_velocity):
        """Harmonic extension of a boundary velocity into the bulk."""
        full = self.extension.extend(boundary_velocity.coefficients)
        return Field(self.mesh, full, 2, "length/time")

    def advance_transform(self, psi, velocity, dt):
        """Explicit update of the deformation map."""
        coeffs = psi.coefficients + dt * velocity.coefficients
        return Field(self.mesh, coeffs, 2, "length")

    def mass_matrix(self, tq):
        return self.asm.assemble("a3", coefficient_samples(3, self.asm, tq))

    def concentration_step(self, u_prev, mass_prev, tq_next, velocity, mu, dt):
        """Conservative transport-diffusion solve on the new shape.

        Parameters
        ----------
        mass_prev : csr_matrix
            Mass matrix of the previous shape (right-hand side weight).
        tq_next : TransformQuantities
            Geometry of the already advanced shape.

        Returns
        -------
        (Field, csr_matrix)
            New concentration and the new shape's mass matrix, which
            becomes ``mass_prev`` of the following step.
        """
        A3 = self.mass_matrix(tq_next)
        A4 = self.asm.assemble(
            "a4", coefficient_samples(4, self.asm, tq_next, velocity=velocity)
        )
        A5 = self.asm.assemble("a5", coefficient_samples(5, self.asm, tq_next))
        system = (A3 + dt * A4 + mu.alpha * dt * A5).tocsc()
        rhs = mass_prev @ u_prev.coefficients
        try:
            x = spla.spsolve(system, rhs)
        except RuntimeError as exc:
            raise SingularSystem(f"concentration solve failed: {exc}") from exc
        _check_residual(system, x, rhs, "concentration")
        return Field(self.mesh, x, 1, "concentration"), A3

    # trajectory driver --------------------------------------------------

    def solve_trajectory(self, mu, n_steps=None, dt=DEFAULT_DT, t_final=None):
        """March the coupled system and record every state.

        Either ``n_steps`` or ``t_final`` must be given.  The returned
        trajectory carries n_steps+1 states, each with its boundary
        velocity and bulk extension attached (the last state's velocity
        is computed too, so downstream training sees the full set).
        """
        if n_steps is None:
            if t_final is None:
                raise ConfigError("need n_steps or t_final")
            n_steps = int(round(t_final / dt))
        if n_steps < 0:
            raise ConfigError(f"n_steps must be nonnegative, got {n_steps}")

        start = time.perf_counter()
        state = self.initial_state(mu)
        try:
            tq = transform_quantities(self.asm, state.transform)
        except SolverFailure as exc:
            raise type(exc)(f"time step 0: {exc}") from exc
        mass_cur = self.mass_matrix(tq)
        states = []
        for n in range(n_steps):
            try:
                qb = self.boundary_velocity_step(
                    state.transform, state.concentration, mu, dt, tq=tq
                )
                qv = self.extend(qb)
                states.append(replace(state, boundary_velocity=qb, velocity=qv))
                psi_next = self.advance_transform(state.transform, qv, dt)
                tq = transform_quantities(self.asm, psi_next)
                u_next, mass_cur = self.concentration_step(
                    state.concentration, mass_cur, tq, qv, mu, dt
                )
            except SolverFailure as exc:
                raise type(exc)(f"time step {n + 1}: {exc}") from exc
            state = FomState(n + 1, (n + 1) * dt, u_next, psi_next)
        try:
            qb = self.boundary_velocity_step(
                state.transform, state.concentration, mu, dt, tq=tq
            )
            qv = self.extend(qb)
        except SolverFailure as exc:
            raise type(exc)(f"time step {n_steps}: {exc}") from exc
        states.append(replace(state, boundary_velocity=qb, velocity=qv))
        return Trajectory(mu, dt, states, time.perf_counter() - start)

    # scalar diagnostics -------------------------------------------------

    def total_mass(self, u, psi):
        """Solute content of the deformed configuration."""
        tq = transform_quantities(self.asm, psi)
        return self._mass_from_tq(u.coefficients, tq)

    def _mass_from_tq(self, u_coeffs, tq):
        w = self.asm.quad.tri_weights
        bary = self.asm.quad.tri_bary
        uq = np.einsum("qa,ca->cq", bary, u_coeffs[self.mesh.cells])
        cellwise = self.asm.det * tq.volume_factor * (uq @ w)
        return float(np.sum(cellwise))

    def variance(self, u, psi):
        """Spatial variance of the concentration over the deformed domain."""
        tq = transform_quantities(self.asm, psi)
        w = self.asm.quad.tri_weights
        bary = self.asm.quad.tri_bary
        uq = np.einsum("qa,ca->cq", bary, u.coefficients[self.mesh.cells])
        jw = (self.asm.det * tq.volume_factor)[:, None] * w[None, :]
        volume = float(np.sum(jw))
        mean = float(np.sum(jw * uq)) / volume
        return float(np.sum(jw * (uq - mean) ** 2)) / volume


def parameter_grid(spec):
    """Tensor grid of training parameters from a spec like ``3x3`` or ``2x2x2x2``.

    Two factors vary only the shape weights over [0, 1]^2 with alpha
    and beta pinned at 0.1; four factors span the full admissible box.
    Grid order is row-major over (alpha, beta, delta1, delta2).
    """
    try:
        counts = tuple(int(tok) for tok in str(spec).lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {spec!r}") from exc
    if any(c < 1 for c in counts):
        raise ConfigError(f"grid counts must be positive, got {spec!r}")
    if len(counts) == 2:
        axes = [
            np.array([0.1]),
            np.array([0.1]),
            np.linspace(*DELTA_RANGE, counts[0]),
            np.linspace(*DELTA_RANGE, counts[1]),
        ]
    elif len(counts) == 4:
        axes = [
            np.linspace(*ALPHA_RANGE, counts[0]),
            np.linspace(*BETA_RANGE, counts[1]),
            np.linspace(*DELTA_RANGE, counts[2]),
            np.linspace(*DELTA_RANGE, counts[3]),
        ]
    else:
        raise ConfigError(f"grid spec needs 2 or 4 factors, got {spec!r}")
    grids = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([g.reshape(-1) for g in grids], axis=1)
    return [ParameterVector(*row) for row in flat]


def sample_parameters(seed, count, delta_only=False):
    """Independent uniform draws from the admissible parameter box.

    With ``delta_only`` the diffusion and tension parameters stay at
    0.1 and only the shape weights are drawn, matching the reduced
    training setups.  Draw order per sample is (alpha, beta, delta1,
    delta2), so a fixed seed pins the whole sequence.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        if delta_only:
            alpha, beta = 0.1, 0.1
        else:
            alpha = rng.uniform(*ALPHA_RANGE)
            beta = rng.uniform(*BETA_RANGE)
        d1 = rng.uniform(*DELTA_RANGE)
        d2 = rng.uniform(*DELTA_RANGE)
        out.append(ParameterVector(alpha, beta, d1, d2))
    return out
