"""Snapshot campaigns over a set of training parameters.

A campaign runs the full solver once per parameter vector and exposes
the results in the layouts the reduction steps want: stacked state
vectors per snapshot family and flattened coefficient samples per
geometry coefficient.  Failed trajectories are recorded and skipped,
they do not abort the campaign.

Coefficient training matrices are built lazily, one coefficient at a
time, because on fine meshes a single matrix can run to hundreds of
megabytes; callers should let each one go out of scope before asking
for the next.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from swellrom.ale_geometry import (
    COEFFICIENT_LAYOUT,
    coefficient_samples,
    transform_quantities,
)
from swellrom.errors import EmptySnapshotSet, SolverFailure

SNAPSHOT_KINDS = ("boundary-velocity", "deformation", "concentration")


@dataclass
class CampaignEntry:
    parameters: object
    trajectory: Optional[object]
    error: str = ""
    wall_time: float = 0.0

    @property
    def ok(self):
        return self.trajectory is not None


@dataclass
class Campaign:
    """Results of one training sweep, bound to the solver that ran it."""

    solver: object
    n_steps: int
    dt: float
    entries: list = field(default_factory=list)

    @property
    def trajectories(self):
        return [e.trajectory for e in self.entries if e.ok]

    @property
    def n_failed(self):
        return sum(not e.ok for e in self.entries)

    def report_rows(self):
        rows = []
        for k, e in enumerate(self.entries):
            mu = e.parameters
            rows.append(
                {
                    "index": k,
                    "alpha": mu.alpha,
                    "beta": mu.beta,
                    "delta1": mu.delta1,
                    "delta2": mu.delta2,
                    "status": "ok" if e.ok else "failed",
                    "detail": e.error,
                    "wall_seconds": e.wall_time,
                }
            )
        return rows

    def snapshot_matrix(self, kind):
        """All states of all successful trajectories, one per column.

        Deformation snapshots are stored relative to the identity map,
        so the reduced deformation space only has to span displacements.
        """
        trajs = self.trajectories
        if not trajs:
            raise EmptySnapshotSet("campaign produced no usable trajectories")
        cols = []
        ident = self.solver.identity_coefficients
        for traj in trajs:
            for state in traj.states:
                if kind == "boundary-velocity":
                    cols.append(state.boundary_velocity.coefficients)
                elif kind == "deformation":
                    cols.append(state.transform.coefficients - ident)
                elif kind == "concentration":
                    cols.append(state.concentration.coefficients)
                else:
                    raise EmptySnapshotSet(f"unknown snapshot kind {kind!r}")
        return np.column_stack(cols)

    def coefficient_matrix(self, i):
        """Flattened training samples of coefficient ``i``, one state per row.

        The transport coefficient (4) pairs each shape with the
        velocity that produced it, so the initial state of every
        trajectory contributes nothing and is skipped for it.
        """
        trajs = self.trajectories
        if not trajs:
            raise EmptySnapshotSet("campaign produced no usable trajectories")
        asm = self.solver.asm
        _, d = COEFFICIENT_LAYOUT[i]
        rows = []
        for traj in trajs:
            for n, state in enumerate(traj.states):
                if i == 4 and n == 0:
                    continue
                tq = transform_quantities(asm, state.transform)
                kwargs = {}
                if i == 4:
                    kwargs["velocity"] = traj.states[n - 1].velocity
                elif i == 7:
                    kwargs["concentration"] = (
                        state.concentration.coefficients
                        - traj.parameters.u_ext
                    )
                rows.append(
                    coefficient_samples(i, asm, tq, **kwargs).reshape(-1)
                )
        return np.vstack(rows)


def run_campaign(solver, parameters, n_steps, dt, workers=1):
    """Solve one trajectory per parameter vector.

    Failures of class ``SolverFailure`` are caught per trajectory and
    recorded; anything else propagates.  With ``workers > 1``
    trajectories run in a thread pool (assembly and sparse solves
    release the interpreter lock for most of their time).
    """
    def one(mu):
        start = time.perf_counter()
        try:
            traj = solver.solve_trajectory(mu, n_steps=n_steps, dt=dt)
            return CampaignEntry(mu, traj, "", time.perf_counter() - start)
        except SolverFailure as exc:
            return CampaignEntry(mu, None, str(exc), time.perf_counter() - start)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, parameters))
    else:
        entries = [one(mu) for mu in parameters]
    return Campaign(solver, n_steps, dt, entries)
