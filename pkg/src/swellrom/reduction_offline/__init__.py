"""Offline pipeline: snapshots, compression, interpolation, projection."""

from swellrom.reduction_offline.campaign import Campaign, run_campaign
from swellrom.reduction_offline.pod import ReducedBasis, pod, full_basis
from swellrom.reduction_offline.eim import EimData, eim_greedy, interpolation_weights
from swellrom.reduction_offline.project import ReducedOperators, project_operators
from swellrom.reduction_offline.model import (
    ReducedModel,
    build_model,
    slice_model,
    save_model,
    load_model,
)
from swellrom.reduction_offline.archive import read_archive, write_archive

__all__ = [
    "Campaign",
    "run_campaign",
    "ReducedBasis",
    "pod",
    "full_basis",
    "EimData",
    "eim_greedy",
    "interpolation_weights",
    "ReducedOperators",
    "project_operators",
    "ReducedModel",
    "build_model",
    "slice_model",
    "save_model",
    "load_model",
    "read_archive",
    "write_archive",
]
