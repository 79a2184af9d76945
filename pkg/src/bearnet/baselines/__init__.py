"""Comparison graph-network models trained on the same bearing records.

Three architectures, one interface: ``gns`` (history-based, raw Cartesian
features, acceleration supervision), ``egnn`` (E(2)-equivariant, messages
along edge displacement vectors), and ``gmn`` (equivariant messages in the
displacement/velocity edge basis). Each module exposes mlp_specs, extract,
collate, forward, loss, and de-normalizers; ``common.train_baseline`` runs
the shared training loop for any of them.
"""
from __future__ import annotations

from . import common, egnn, gmn, gns
from .common import (
    BaselineConfig,
    BaselineTrainConfig,
    BaselineTrainResult,
    fit_baseline_stats,
    train_baseline,
)

MODEL_KINDS = {gns.KIND: gns, egnn.KIND: egnn, gmn.KIND: gmn}

__all__ = [
    "MODEL_KINDS",
    "BaselineConfig",
    "BaselineTrainConfig",
    "BaselineTrainResult",
    "baseline_module",
    "common",
    "egnn",
    "fit_baseline_stats",
    "gmn",
    "gns",
    "train_baseline",
]


def baseline_module(kind: str):
    """Look up a comparison-model module by its kind tag."""
    try:
        return MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(
            f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}"
        ) from None
