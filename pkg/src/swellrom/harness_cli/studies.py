"""Study drivers: pipeline commands and the reported experiments."""

import os

import numpy as np
import scipy.sparse as sp

from swellrom.errors import ConfigError, SolverFailure
from swellrom.fem_core import generate_disk_mesh, mesh_hash, mesh_text
from swellrom.fom_solver import (
    FomSolver,
    ParameterVector,
    parameter_grid,
    sample_parameters,
)
from swellrom.reduction_offline import (
    build_model,
    load_model,
    run_campaign,
    save_model,
    slice_model,
    write_archive,
)
from swellrom.reduction_offline.model import BASIS_KINDS
from swellrom.rom_online import RomSolver

ERROR_NORM_NOTE = (
    "max-over-time H1 norm of the difference, relative to the"
    " max-over-time H1 norm of the reference trajectory"
)
BG_HALF_WIDTH = 3.0


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, meta, header, rows):
    lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _meta(cfg, mesh, extra=None):
    meta = {f"config.{k}": v for k, v in cfg.echo().items()}
    meta["mesh_hash"] = mesh_hash(mesh)
    meta["n_vertices"] = str(mesh.n_vertices)
    meta.update(extra or {})
    return meta


def _ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _solver_for(cfg):
    """FOM solver on the configured mesh, or on a loaded model's mesh."""
    if cfg.model:
        model = load_model(cfg.model)
        return FomSolver(model.mesh), model
    return FomSolver(generate_disk_mesh(cfg.mesh_h)), None


def _pins(cfg):
    pod_ranks = None
    eim_caps = None
    if cfg.pod_rank > 0:
        pod_ranks = {kind: cfg.pod_rank for kind in BASIS_KINDS}
    if cfg.eim_modes > 0:
        eim_caps = cfg.eim_modes
    return pod_ranks, eim_caps


def _build_master(cfg, solver):
    """Offline pipeline at the tightest configured tolerances."""
    params = parameter_grid(cfg.train_grid)
    campaign = run_campaign(
        solver, params, n_steps=cfg.n_steps(), dt=cfg.dt, workers=cfg.workers
    )
    pod_ranks, eim_caps = _pins(cfg)
    master = build_model(
        solver,
        campaign,
        eps_rb=min(cfg.eps_rb_list()),
        eps_ei=min(cfg.eps_ei_list()),
        pod_ranks=pod_ranks,
        eim_caps=eim_caps,
        with_variance=cfg.with_variance,
        config=cfg.echo(),
    )
    return campaign, master


def _acquire_model(cfg, solver, prebuilt):
    if prebuilt is not None:
        return prebuilt
    _, master = _build_master(cfg, solver)
    return master


def _slice(cfg, master, eps_rb, eps_ei):
    pod_ranks, eim_caps = _pins(cfg)
    eim_modes = None
    if eim_caps is not None:
        eim_modes = {i: eim_caps for i in master.eims}
    return slice_model(
        master, eps_rb=eps_rb, eps_ei=eps_ei, pod_ranks=pod_ranks, eim_modes=eim_modes
    )


def _test_set(cfg):
    """Random test parameters over the same axes as the training grid."""
    delta_only = cfg.train_grid.count("x") == 1
    return sample_parameters(cfg.seed, cfg.test_count, delta_only=delta_only)


def _mass_error(masses):
    """Final-versus-initial relative solute content drift."""
    return abs(masses[-1] - masses[0]) / abs(masses[0])


def run_fom(cfg):
    """Solve one full-order trajectory; archive states, summarize per step."""
    out = _ensure_out(cfg)
    solver, _ = _solver_for(cfg)
    mesh = solver.asm.mesh
    traj = solver.solve_trajectory(cfg.parameters(), n_steps=cfg.n_steps(), dt=cfg.dt)

    conc = np.array([s.concentration.coefficients for s in traj.states])
    trans = np.array([s.transform.coefficients for s in traj.states])
    bvel = np.array([s.boundary_velocity.coefficients for s in traj.states])
    write_archive(
        os.path.join(out, "fom_trajectory"),
        meta={"kind": "fom-trajectory", "mesh_hash": mesh_hash(mesh),
              **{f"config.{k}": v for k, v in cfg.echo().items()}},
        arrays={"concentration": conc, "transform": trans,
                "boundary_velocity": bvel},
        texts={"mesh": mesh_text(mesh)},
    )

    ident = solver.identity_coefficients
    rows = []
    for s in traj.states:
        mass = solver.total_mass(s.concentration, s.transform)
        var = solver.variance(s.concentration, s.transform)
        disp = np.abs(s.transform.coefficients - ident).max()
        speed = np.abs(s.boundary_velocity.coefficients).max()
        rows.append((s.index, s.time, mass, var, disp, speed))
    _write_csv(
        os.path.join(out, "fom_summary.csv"),
        _meta(cfg, mesh),
        ["step", "time", "total_mass", "variance",
         "max_displacement", "max_boundary_speed"],
        rows,
    )
    _write_csv(
        os.path.join(out, "fom_timings.csv"),
        _meta(cfg, mesh),
        ["wall_seconds"],
        [(traj.wall_time,)],
    )
    return traj


def run_offline(cfg):
    """Train, compress, project and persist a reduced model."""
    out = _ensure_out(cfg)
    solver, _ = _solver_for(cfg)
    mesh = solver.asm.mesh
    campaign, master = _build_master(cfg, solver)

    report = campaign.report_rows()
    _write_csv(
        os.path.join(out, "campaign.csv"),
        _meta(cfg, mesh),
        ["index", "alpha", "beta", "delta1", "delta2",
         "status", "detail", "wall_seconds"],
        [tuple(r[k] for k in ("index", "alpha", "beta", "delta1", "delta2",
                              "status", "detail", "wall_seconds"))
         for r in report],
    )

    rows = []
    for eps_rb in cfg.eps_rb_list():
        for eps_ei in cfg.eps_ei_list():
            dims = _slice(cfg, master, eps_rb, eps_ei).dims()
            rows.append((eps_rb, eps_ei, dims["Kq"], dims["Kpsi"], dims["Ku"],
                         *(dims[f"M{i}"] for i in range(1, 8))))
    _write_csv(
        os.path.join(out, "offline_sizes.csv"),
        _meta(cfg, mesh),
        ["eps_rb", "eps_ei", "n_boundary_velocity", "n_deformation",
         "n_concentration"] + [f"m_coefficient_{i}" for i in range(1, 8)],
        rows,
    )
    save_model(master, os.path.join(out, "model"))
    return master


def run_rom(cfg):
    """Solve one reduced trajectory; summarize content per step."""
    out = _ensure_out(cfg)
    solver, prebuilt = _solver_for(cfg)
    mesh = solver.asm.mesh
    master = _acquire_model(cfg, solver, prebuilt)
    model = _slice(cfg, master, cfg.eps_rb_list()[0], cfg.eps_ei_list()[0])
    rom = RomSolver(model, conservative=cfg.conservative)
    traj = rom.solve(cfg.parameters(), n_steps=cfg.n_steps(), dt=cfg.dt)

    has_var = model.ops.var_c0 is not None
    header = ["step", "time", "total_mass"] + (["variance"] if has_var else [])
    rows = []
    for s in traj.states:
        row = [s.index, s.time, rom.total_mass(s)]
        if has_var:
            row.append(rom.variance(s))
        rows.append(tuple(row))
    dims = model.dims()
    meta = _meta(cfg, mesh, {f"dims.{k}": str(v) for k, v in dims.items()})
    _write_csv(os.path.join(out, "rom_summary.csv"), meta, header, rows)

    timing_header = sorted(traj.timings)
    _write_csv(
        os.path.join(out, "rom_timings.csv"),
        meta,
        timing_header + ["wall_seconds"],
        [tuple(traj.timings[k] for k in timing_header) + (traj.wall_time,)],
    )
    return traj


def _rom_errors(solver, rom, mu, n_steps, dt, fom_states, denom_u, denom_psi):
    """Max-over-time relative H1 errors and the content drift, capped at 1."""
    try:
        traj = rom.solve(mu, n_steps=n_steps, dt=dt)
    except SolverFailure:
        return 1.0, 1.0, 1.0, 0.0, "failed"
    err_u = 0.0
    err_psi = 0.0
    for fs, rs in zip(fom_states, traj.states):
        u_r, psi_r = rom.reconstruct(rs)
        err_u = max(err_u, solver.product_h1.norm(
            fs.concentration.coefficients - u_r.coefficients))
        err_psi = max(err_psi, solver.product_h1_vector.norm(
            fs.transform.coefficients - psi_r.coefficients))
    masses = [rom.total_mass(s) for s in traj.states]
    return (min(err_u / denom_u, 1.0), min(err_psi / denom_psi, 1.0),
            min(_mass_error(masses), 1.0), traj.wall_time, "ok")


def run_error_surface(cfg):
    """Reduction errors over the (eps_rb, eps_ei) grid and a random test set."""
    out = _ensure_out(cfg)
    solver, prebuilt = _solver_for(cfg)
    mesh = solver.asm.mesh
    master = _acquire_model(cfg, solver, prebuilt)
    n_steps = cfg.n_steps()

    test = _test_set(cfg)
    fom = []
    for mu in test:
        traj = solver.solve_trajectory(mu, n_steps=n_steps, dt=cfg.dt)
        denom_u = max(solver.product_h1.norm(s.concentration.coefficients)
                      for s in traj.states)
        denom_psi = max(solver.product_h1_vector.norm(s.transform.coefficients)
                        for s in traj.states)
        fom.append((traj, denom_u, denom_psi))

    rows = []
    timing_rows = []
    for eps_rb in cfg.eps_rb_list():
        for eps_ei in cfg.eps_ei_list():
            model = _slice(cfg, master, eps_rb, eps_ei)
            rom = RomSolver(model, conservative=cfg.conservative)
            for k, mu in enumerate(test):
                traj, denom_u, denom_psi = fom[k]
                err_u, err_psi, err_mass, rom_time, status = _rom_errors(
                    solver, rom, mu, n_steps, cfg.dt,
                    traj.states, denom_u, denom_psi)
                rows.append((k, mu.alpha, mu.beta, mu.delta1, mu.delta2,
                             eps_rb, eps_ei, err_u, err_psi, err_mass, status))
                timing_rows.append((k, eps_rb, eps_ei,
                                    traj.wall_time, rom_time))
    meta = _meta(cfg, mesh, {"error_norm": ERROR_NORM_NOTE})
    _write_csv(
        os.path.join(out, "error_surface.csv"),
        meta,
        ["test_index", "alpha", "beta", "delta1", "delta2", "eps_rb", "eps_ei",
         "error_concentration", "error_deformation", "error_mass", "status"],
        rows,
    )
    _write_csv(
        os.path.join(out, "error_surface_timings.csv"),
        meta,
        ["test_index", "eps_rb", "eps_ei", "fom_seconds", "rom_seconds"],
        timing_rows,
    )
    return rows


def run_conservation(cfg):
    """Content drift of both concentration updates, untruncated."""
    out = _ensure_out(cfg)
    solver, prebuilt = _solver_for(cfg)
    mesh = solver.asm.mesh
    master = _acquire_model(cfg, solver, prebuilt)
    n_steps = cfg.n_steps()
    test = _test_set(cfg)

    rows = []
    for eps_rb in cfg.eps_rb_list():
        for eps_ei in cfg.eps_ei_list():
            model = _slice(cfg, master, eps_rb, eps_ei)
            for variant, conservative in (("conservative", True), ("plain", False)):
                rom = RomSolver(model, conservative=conservative)
                for k, mu in enumerate(test):
                    status = "ok"
                    try:
                        traj = rom.solve(mu, n_steps=n_steps, dt=cfg.dt)
                        states = traj.states
                    except SolverFailure as exc:
                        # drift over whatever prefix survived
                        states = exc.partial.states
                        status = "failed"
                    masses = [rom.total_mass(s) for s in states]
                    drift = _mass_error(masses) if len(masses) > 1 else 0.0
                    rows.append((k, mu.alpha, mu.beta, mu.delta1, mu.delta2,
                                 eps_rb, eps_ei, variant, drift, status))
    _write_csv(
        os.path.join(out, "conservation.csv"),
        _meta(cfg, mesh),
        ["test_index", "alpha", "beta", "delta1", "delta2", "eps_rb", "eps_ei",
         "variant", "mass_drift", "status"],
        rows,
    )
    return rows


def run_speedup(cfg):
    """Median online speedup of both concentration updates.

    Everything here is wall-clock derived, so the whole table lives in a
    timings file; model load and output cost are excluded by measuring
    the solve calls only.
    """
    out = _ensure_out(cfg)
    solver, prebuilt = _solver_for(cfg)
    mesh = solver.asm.mesh
    master = _acquire_model(cfg, solver, prebuilt)
    n_steps = cfg.n_steps()
    test = _test_set(cfg)

    fom_times = []
    for mu in test:
        traj = solver.solve_trajectory(mu, n_steps=n_steps, dt=cfg.dt)
        fom_times.append(traj.wall_time)

    rows = []
    for eps_rb in cfg.eps_rb_list():
        for eps_ei in cfg.eps_ei_list():
            model = _slice(cfg, master, eps_rb, eps_ei)
            times = {}
            for variant, conservative in (("cons", True), ("plain", False)):
                rom = RomSolver(model, conservative=conservative)
                per_mu = []
                for mu in test:
                    try:
                        per_mu.append(rom.solve(mu, n_steps=n_steps, dt=cfg.dt).wall_time)
                    except SolverFailure:
                        per_mu.append(np.nan)
                times[variant] = np.asarray(per_mu)
            ratio_cons = np.asarray(fom_times) / times["cons"]
            ratio_plain = np.asarray(fom_times) / times["plain"]
            rows.append((
                eps_rb, eps_ei, len(test),
                float(np.median(fom_times)),
                float(np.nanmedian(times["cons"])),
                float(np.nanmedian(times["plain"])),
                float(np.nanmedian(ratio_cons)),
                float(np.nanmedian(ratio_plain)),
            ))
    _write_csv(
        os.path.join(out, "speedup_timings.csv"),
        _meta(cfg, mesh),
        ["eps_rb", "eps_ei", "n_test", "median_fom_seconds",
         "median_rom_conservative_seconds", "median_rom_plain_seconds",
         "median_speedup_conservative", "median_speedup_plain"],
        rows,
    )
    return rows


def _background_lattice(spacing):
    """Uniform triangulation of the embedding square, CCW cells."""
    n = int(np.ceil(2.0 * BG_HALF_WIDTH / spacing))
    axis = np.linspace(-BG_HALF_WIDTH, BG_HALF_WIDTH, n + 1)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (ii * (n + 1) + jj).ravel()
    v10 = v00 + (n + 1)
    v01 = v00 + 1
    v11 = v10 + 1
    cells = np.concatenate([
        np.column_stack([v00, v10, v11]),
        np.column_stack([v00, v11, v01]),
    ])
    return vertices, cells, axis


def _lattice_mass(n_vertices, cells, spacing):
    """P1 mass matrix of congruent right triangles of area spacing^2/2."""
    area = 0.5 * spacing * spacing
    local = (area / 12.0) * (np.ones((3, 3)) + np.eye(3))
    rows = np.repeat(cells, 3, axis=1).ravel()
    cols = np.tile(cells, (1, 3)).ravel()
    data = np.tile(local.ravel(), len(cells))
    return sp.coo_matrix((data, (rows, cols)),
                         shape=(n_vertices, n_vertices)).tocsr()


def _embed_state(mesh, state, axis, values_out):
    """Sample the moving-domain view of a state on the lattice vertices.

    Vertices covered by the deformed mesh get the pulled-back P1 value,
    everything else stays zero; a vertex on a shared edge belongs to the
    first cell that reaches it.
    """
    spacing = axis[1] - axis[0]
    n1 = len(axis)
    pos = state.transform.coefficients.reshape(-1, 2)
    if np.abs(pos).max() > BG_HALF_WIDTH:
        raise ConfigError(
            "deformed mesh leaves the embedding square; enlarge the background"
        )
    tri = pos[mesh.cells]                       # (nc, 3, 2)
    conc = state.concentration.coefficients[mesh.cells]
    claimed = np.zeros(n1 * n1, dtype=bool)
    lo = -BG_HALF_WIDTH
    for c in range(len(tri)):
        p0, p1, p2 = tri[c]
        xmin = min(p0[0], p1[0], p2[0])
        xmax = max(p0[0], p1[0], p2[0])
        ymin = min(p0[1], p1[1], p2[1])
        ymax = max(p0[1], p1[1], p2[1])
        i0 = max(0, int(np.ceil((xmin - lo) / spacing - 1e-12)))
        i1 = min(n1 - 1, int(np.floor((xmax - lo) / spacing + 1e-12)))
        j0 = max(0, int(np.ceil((ymin - lo) / spacing - 1e-12)))
        j1 = min(n1 - 1, int(np.floor((ymax - lo) / spacing + 1e-12)))
        if i0 > i1 or j0 > j1:
            continue
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1),
                             indexing="ij")
        flat = (ii * n1 + jj).ravel()
        flat = flat[~claimed[flat]]
        if flat.size == 0:
            continue
        pts = np.column_stack([lo + (flat // n1) * spacing,
                               lo + (flat % n1) * spacing])
        e1 = p1 - p0
        e2 = p2 - p0
        det = e1[0] * e2[1] - e1[1] * e2[0]
        rel = pts - p0
        lam1 = (rel[:, 0] * e2[1] - rel[:, 1] * e2[0]) / det
        lam2 = (e1[0] * rel[:, 1] - e1[1] * rel[:, 0]) / det
        lam0 = 1.0 - lam1 - lam2
        # closed-cell convention: edges and vertices count as inside
        inside = (lam0 >= -1e-12) & (lam1 >= -1e-12) & (lam2 >= -1e-12)
        hit = flat[inside]
        if hit.size == 0:
            continue
        values_out[hit] = (lam0[inside] * conc[c, 0]
                           + lam1[inside] * conc[c, 1]
                           + lam2[inside] * conc[c, 2])
        claimed[hit] = True


def _weighted_singular_values(snapshots, mass):
    """Singular values of a snapshot set under an L2 mass weighting."""
    gram = snapshots @ (mass @ snapshots.T)
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    return np.sqrt(np.clip(eigs, 0.0, None))[::-1]


def run_svd_compare(cfg):
    """Snapshot spectra of the moving-frame fields versus the fixed-frame view."""
    out = _ensure_out(cfg)
    solver, _ = _solver_for(cfg)
    mesh = solver.asm.mesh
    traj = solver.solve_trajectory(cfg.parameters(), n_steps=cfg.n_steps(), dt=cfg.dt)

    spacing = cfg.bg_spacing if cfg.bg_spacing > 0.0 else cfg.mesh_h
    bg_vertices, bg_cells, axis = _background_lattice(spacing)
    bg_mass = _lattice_mass(len(bg_vertices), bg_cells, axis[1] - axis[0])

    conc = np.array([s.concentration.coefficients for s in traj.states])
    ident = solver.identity_coefficients
    disp = np.array([s.transform.coefficients - ident for s in traj.states])
    eulerian = np.zeros((len(traj.states), len(bg_vertices)))
    for k, state in enumerate(traj.states):
        _embed_state(mesh, state, axis, eulerian[k])

    mass_s = solver.asm.scalar_mass()
    mass_v = sp.kron(mass_s, sp.identity(2, format="csr"), format="csr")
    sv_u = _weighted_singular_values(conc, mass_s)
    sv_psi = _weighted_singular_values(disp, mass_v)
    sv_eul = _weighted_singular_values(eulerian, bg_mass)

    n_report = min(20, len(sv_u), len(sv_psi), len(sv_eul))
    rows = []
    for k in range(n_report):
        rows.append((k + 1,
                     sv_u[k] / sv_u[0], sv_psi[k] / sv_psi[0],
                     sv_eul[k] / sv_eul[0],
                     sv_u[k], sv_psi[k], sv_eul[k]))
    meta = _meta(cfg, mesh, {
        "bg_spacing": _fmt(float(axis[1] - axis[0])),
        "bg_vertices": str(len(bg_vertices)),
    })
    _write_csv(
        os.path.join(out, "svd_compare.csv"),
        meta,
        ["k", "rel_sv_concentration", "rel_sv_deformation", "rel_sv_eulerian",
         "sv_concentration", "sv_deformation", "sv_eulerian"],
        rows,
    )
    return rows


def run_variance_sweep(cfg):
    """Concentration variance over a shape-parameter grid at fixed times."""
    out = _ensure_out(cfg)
    solver, prebuilt = _solver_for(cfg)
    mesh = solver.asm.mesh
    master = _acquire_model(cfg, solver, prebuilt)
    model = _slice(cfg, master, cfg.eps_rb_list()[0], cfg.eps_ei_list()[0])
    if model.ops.var_c0 is None:
        raise ConfigError("model was built without variance tensors")
    rom = RomSolver(model, conservative=cfg.conservative)

    n_steps = cfg.n_steps()
    times = cfg.times_list()
    indices = [int(round(t / cfg.dt)) for t in times]
    grid = np.linspace(0.0, 1.0, cfg.variance_grid)
    rows = []
    for d1 in grid:
        for d2 in grid:
            mu = ParameterVector(cfg.alpha, cfg.beta, float(d1), float(d2))
            try:
                traj = rom.solve(mu, n_steps=n_steps, dt=cfg.dt)
                for t, idx in zip(times, indices):
                    rows.append((float(d1), float(d2), t,
                                 rom.variance(traj.states[idx]), "ok"))
            except SolverFailure:
                for t in times:
                    rows.append((float(d1), float(d2), t, float("nan"), "failed"))
    _write_csv(
        os.path.join(out, "variance_sweep.csv"),
        _meta(cfg, mesh),
        ["delta1", "delta2", "time", "variance", "status"],
        rows,
    )
    return rows
