"""Reduced model container: build, re-truncate, save, load.

A model built once at tight tolerances can be re-truncated to any
looser pair without touching the full solver again, because reduced
bases and greedy interpolation data are prefix-ordered.  Tolerance
sweeps therefore build one master model and slice it.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from swellrom.ale_geometry import COEFFICIENT_LAYOUT
from swellrom.errors import DimensionMismatch
from swellrom.fem_core.mesh import mesh_from_text, mesh_text
from swellrom.reduction_offline.archive import read_archive, write_archive
from swellrom.reduction_offline.eim import EimData, eim_greedy
from swellrom.reduction_offline.pod import ReducedBasis, full_basis, pod
from swellrom.reduction_offline.project import (
    ReducedOperators,
    project_operators,
    slice_operators,
)

BASIS_KINDS = ("boundary-velocity", "deformation", "concentration")


@dataclass
class ReducedModel:
    mesh_text: str
    config: dict
    bases: dict
    eims: dict
    ops: ReducedOperators
    _mesh: Optional[object] = field(default=None, repr=False)

    @property
    def mesh(self):
        if self._mesh is None:
            self._mesh = mesh_from_text(self.mesh_text)
        return self._mesh

    def dims(self):
        out = self.ops.dims()
        for i, eim in sorted(self.eims.items()):
            out[f"M{i}"] = eim.n_modes
        return out


def build_model(solver, campaign, eps_rb, eps_ei, pod_ranks=None,
                eim_caps=None, with_variance=True, full_bases=False,
                config=None):
    """Run the whole offline pipeline on a finished campaign.

    Parameters
    ----------
    solver : FomSolver
    campaign : Campaign
    eps_rb, eps_ei : float
        Basis truncation and interpolation tolerances.
    pod_ranks : dict, optional
        Basis kind to hard mode cap (pins dimensions for scaling
        studies).
    eim_caps : int or dict, optional
        Hard cap on interpolation modes, per coefficient if a dict.
    full_bases : bool
        Skip compression and keep the complete discrete spaces
        (validation setups only).
    """
    products = {
        "boundary-velocity": solver.product_boundary,
        "deformation": solver.product_h1_vector,
        "concentration": solver.product_h1,
    }
    bases = {}
    for kind in BASIS_KINDS:
        constant = kind == "concentration"
        if full_bases:
            bases[kind] = full_basis(products[kind], kind, constant)
        else:
            snaps = campaign.snapshot_matrix(kind)
            cap = pod_ranks.get(kind) if pod_ranks else None
            bases[kind] = pod(snaps, products[kind], eps_rb, kind,
                              include_constant=constant, max_modes=cap)
            del snaps

    eims = {}
    for i in sorted(COEFFICIENT_LAYOUT):
        domain, d = COEFFICIENT_LAYOUT[i]
        cap = eim_caps.get(i) if isinstance(eim_caps, dict) else eim_caps
        training = campaign.coefficient_matrix(i)
        eims[i] = eim_greedy(training, d, eps_ei, i, domain,
                             max_modes=cap, consume=True)
        del training

    ops = project_operators(solver, bases, eims, with_variance)
    cfg = {
        "eps_rb": repr(float(eps_rb)),
        "eps_ei": repr(float(eps_ei)),
        "dt": repr(float(campaign.dt)),
        "n_steps": str(campaign.n_steps),
        "n_training": str(len(campaign.entries)),
        "n_failed": str(campaign.n_failed),
        "with_variance": "1" if with_variance else "0",
        "full_bases": "1" if full_bases else "0",
    }
    if config:
        cfg.update({str(k): str(v) for k, v in config.items()})
    return ReducedModel(mesh_text(solver.mesh), cfg, bases, eims, ops)


def slice_model(model, eps_rb, eps_ei, pod_ranks=None, eim_modes=None):
    """Re-truncate a model to looser tolerances (or pinned dimensions).

    Every stored array is a literal prefix of the master's, so slicing
    is pure truncation and needs no mesh work.
    """
    bases = {}
    keep = {}
    for kind, basis in model.bases.items():
        if pod_ranks and kind in pod_ranks:
            k = min(int(pod_ranks[kind]), basis.n_modes)
            bases[kind] = replace(basis, modes=basis.modes[:, :k],
                                  tolerance=eps_rb)
        else:
            bases[kind] = basis.sliced(eps_rb)
        keep[kind] = bases[kind].n_modes

    eims = {}
    keep_m = {}
    for i, eim in model.eims.items():
        if eim_modes is not None:
            m = eim_modes.get(i) if isinstance(eim_modes, dict) else eim_modes
            m = min(int(m), eim.n_modes)
            eims[i] = eim.sliced(n_modes=m)
        else:
            eims[i] = eim.sliced(tolerance=eps_ei)
        keep_m[i] = eims[i].n_modes

    ops = slice_operators(
        model.ops,
        keep["boundary-velocity"],
        keep["deformation"],
        keep["concentration"],
        keep_m,
    )
    cfg = dict(model.config)
    cfg["eps_rb"] = repr(float(eps_rb))
    cfg["eps_ei"] = repr(float(eps_ei))
    cfg["sliced_from"] = model.config.get("eps_rb", "") + "/" + \
        model.config.get("eps_ei", "")
    return ReducedModel(model.mesh_text, cfg, bases, eims, ops)


# serialization --------------------------------------------------------

_OPS_ARRAYS = (
    "boundary_mass_stack",
    "boundary_stiffness_stack",
    "volume_mass_stack",
    "transport_stack",
    "diffusion_stack",
    "tangent_load_stack",
    "normal_load_stack",
    "extension_map",
    "initial_concentration",
    "shape_offsets",
    "mass_c0",
    "mass_c1",
    "mass_c2",
)
_VAR_ARRAYS = ("var_c0", "var_c1", "var_c2")


def save_model(model, path):
    """Write a model archive; loading it back reproduces every byte."""
    meta = {"payload": "reduced-model"}
    for key, value in model.config.items():
        meta[f"config.{key}"] = value
    arrays = {}
    for kind, basis in model.bases.items():
        meta[f"basis.{kind}.reference_value"] = repr(basis.reference_value)
        meta[f"basis.{kind}.tolerance"] = repr(basis.tolerance)
        meta[f"basis.{kind}.constant_included"] = \
            "1" if basis.constant_included else "0"
        arrays[f"basis.{kind}.modes"] = basis.modes
        arrays[f"basis.{kind}.singular_values"] = basis.singular_values
    for i, eim in model.eims.items():
        meta[f"eim.{i}.domain"] = eim.domain
        meta[f"eim.{i}.n_components"] = str(eim.n_components)
        meta[f"eim.{i}.tolerance"] = repr(eim.tolerance)
        meta[f"eim.{i}.n_training"] = str(eim.n_training)
        arrays[f"eim.{i}.basis"] = eim.basis
        arrays[f"eim.{i}.pairs"] = eim.pairs
        arrays[f"eim.{i}.collocation"] = eim.collocation
        arrays[f"eim.{i}.recombination"] = eim.recombination
        arrays[f"eim.{i}.selected"] = eim.selected
        arrays[f"eim.{i}.error_history"] = eim.error_history
    ops = model.ops
    meta["ops.one_norm"] = repr(ops.one_norm)
    for name in _OPS_ARRAYS:
        arrays[f"ops.{name}"] = getattr(ops, name)
    if ops.var_c0 is not None:
        for name in _VAR_ARRAYS:
            arrays[f"ops.{name}"] = getattr(ops, name)
    for i, entry in ops.point_geometry.items():
        for key, arr in entry.items():
            arrays[f"geometry.{i}.{key}"] = arr
    write_archive(path, meta, arrays, texts={"mesh": model.mesh_text})


def load_model(path):
    meta, arrays, texts = read_archive(path)
    if meta.get("payload") != "reduced-model":
        raise DimensionMismatch(
            f"archive at {path!r} is not a reduced model"
        )
    config = {
        k[len("config."):]: v for k, v in meta.items()
        if k.startswith("config.")
    }
    bases = {}
    for kind in BASIS_KINDS:
        bases[kind] = ReducedBasis(
            kind=kind,
            modes=arrays[f"basis.{kind}.modes"],
            singular_values=arrays[f"basis.{kind}.singular_values"],
            reference_value=float(meta[f"basis.{kind}.reference_value"]),
            tolerance=float(meta[f"basis.{kind}.tolerance"]),
            constant_included=meta[f"basis.{kind}.constant_included"] == "1",
        )
    eims = {}
    for i in sorted(COEFFICIENT_LAYOUT):
        eims[i] = EimData(
            coefficient_id=i,
            domain=meta[f"eim.{i}.domain"],
            n_components=int(meta[f"eim.{i}.n_components"]),
            basis=arrays[f"eim.{i}.basis"],
            pairs=arrays[f"eim.{i}.pairs"],
            collocation=arrays[f"eim.{i}.collocation"],
            recombination=arrays[f"eim.{i}.recombination"],
            selected=arrays[f"eim.{i}.selected"],
            error_history=arrays[f"eim.{i}.error_history"],
            tolerance=float(meta[f"eim.{i}.tolerance"]),
            n_training=int(meta[f"eim.{i}.n_training"]),
        )
    geometry = {}
    for i in sorted(COEFFICIENT_LAYOUT):
        entry = {}
        for key in ("mode_grads", "mode_values", "ref_normal", "conc_values"):
            name = f"geometry.{i}.{key}"
            if name in arrays:
                entry[key] = arrays[name]
        geometry[i] = entry
    kwargs = {name: arrays[f"ops.{name}"] for name in _OPS_ARRAYS}
    for name in _VAR_ARRAYS:
        kwargs[name] = arrays.get(f"ops.{name}")
    ops = ReducedOperators(
        one_norm=float(meta["ops.one_norm"]),
        point_geometry=geometry,
        **kwargs,
    )
    return ReducedModel(texts["mesh"], config, bases, eims, ops)
