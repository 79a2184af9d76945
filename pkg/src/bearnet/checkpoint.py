"""Checkpoint files: parameters, statistics, optimizer and RNG state.

A checkpoint is a storage container of kind "checkpoint". The JSON header
carries the model kind, its config dict, the per-MLP layer specs, the
normalization statistics, training progress, and the training RNG state; the
binary section holds every weight/bias plus Adam's moment estimates. Loading
reconstructs typed parameters exactly, so training can resume bit-identically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import storage
from .graph import NormalizationStats
from .mlp import MlpParams, MlpSpec
from .optim import AdamState

__all__ = ["Checkpoint", "load_checkpoint", "save_checkpoint"]


@dataclass
class Checkpoint:
    model_kind: str
    config: dict
    params: dict[str, MlpParams]
    stats: NormalizationStats
    step: int
    adam: AdamState | None
    rng_state: dict | None
    extra: dict


def _spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "input_width": spec.input_width,
        "hidden_widths": list(spec.hidden_widths),
        "output_width": spec.output_width,
        "activation": spec.activation,
        "final_layer_zero_init": spec.final_layer_zero_init,
    }


def _spec_from_dict(d: dict) -> MlpSpec:
    return MlpSpec(
        input_width=d["input_width"],
        hidden_widths=tuple(d["hidden_widths"]),
        output_width=d["output_width"],
        activation=d["activation"],
        final_layer_zero_init=d["final_layer_zero_init"],
    )


def save_checkpoint(
    path,
    model_kind: str,
    config: dict,
    params: dict[str, MlpParams],
    stats: NormalizationStats,
    step: int = 0,
    adam: AdamState | None = None,
    rng_state: dict | None = None,
    extra: dict | None = None,
) -> None:
    header = {
        "kind": "checkpoint",
        "model_kind": model_kind,
        "config": config,
        "stats": stats.to_dict(),
        "step": step,
        "rng_state": rng_state,
        "extra": extra or {},
        "mlps": {name: _spec_to_dict(p.spec) for name, p in params.items()},
        "adam": None,
    }
    arrays: dict[str, np.ndarray] = {}
    for p in params.values():
        for leaf_name, arr in p.flat():
            arrays[f"param.{leaf_name}"] = arr
    if adam is not None:
        header["adam"] = {
            "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
            "eps": adam.eps, "step": adam.step, "keys": sorted(adam.m),
        }
        for key in adam.m:
            arrays[f"adam.m.{key}"] = adam.m[key]
            arrays[f"adam.v.{key}"] = adam.v[key]
    storage.write_container(path, header, arrays)


def load_checkpoint(path) -> Checkpoint:
    header, arrays = storage.read_container(path)
    if header.get("kind") != "checkpoint":
        raise storage.StorageError(
            f"expected a checkpoint container, found kind={header.get('kind')!r}"
        )
    params: dict[str, MlpParams] = {}
    for name, spec_dict in header["mlps"].items():
        spec = _spec_from_dict(spec_dict)
        weights, biases = [], []
        for i in range(len(spec.layer_widths) - 1):
            try:
                weights.append(arrays[f"param.{name}.W{i}"])
                biases.append(arrays[f"param.{name}.b{i}"])
            except KeyError as exc:
                raise storage.StorageError(f"checkpoint missing array {exc}") from exc
        p = MlpParams(name=name, spec=spec, weights=weights, biases=biases)
        p.validate()
        params[name] = p

    adam = None
    if header.get("adam"):
        meta = header["adam"]
        adam = AdamState(
            lr=meta["lr"], beta1=meta["beta1"], beta2=meta["beta2"],
            eps=meta["eps"], step=meta["step"],
        )
        for key in meta["keys"]:
            try:
                adam.m[key] = arrays[f"adam.m.{key}"]
                adam.v[key] = arrays[f"adam.v.{key}"]
            except KeyError as exc:
                raise storage.StorageError(f"checkpoint missing array {exc}") from exc

    return Checkpoint(
        model_kind=header["model_kind"],
        config=header["config"],
        params=params,
        stats=NormalizationStats.from_dict(header["stats"]),
        step=header["step"],
        adam=adam,
        rng_state=header.get("rng_state"),
        extra=header.get("extra", {}),
    )
