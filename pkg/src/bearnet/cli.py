"""Command-line entry point: datagen, train, rollout, eval, compare, inspect.

Configuration comes from JSON files carrying a ``schema_version``; command
flags override config fields. Every subcommand is reproducible from its
config and seed alone. Exit codes: 0 success, 2 configuration error, 3 I/O
error, 4 numerical divergence.

Heavy imports happen inside the handlers so that the ``BEARNET_THREADS``
environment variable can cap the linear-algebra thread pools before any
numerical library loads.
"""
from __future__ import annotations

import argparse
import glob as globlib
import json
import os
import sys
from dataclasses import asdict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4

CONFIG_SCHEMA_VERSION = 1


class CliError(Exception):
    """A user-facing failure with its exit code and error category."""

    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


def _config_error(message: str) -> CliError:
    return CliError(EXIT_CONFIG, "config", message)


def _io_error(message: str) -> CliError:
    return CliError(EXIT_IO, "io", message)


def _apply_thread_env() -> None:
    n = os.environ.get("BEARNET_THREADS")
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise _config_error(f"BEARNET_THREADS must be a positive integer, got {n!r}")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, n)


# ------------------------------------------------------------ config plumbing


def load_config(path: str | None, defaults: dict, allowed: set[str], name: str) -> dict:
    """Read a JSON config, validate its schema version and field names."""
    merged = dict(defaults)
    if path is None:
        return merged
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise _io_error(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise _config_error(f"config file {path} is not valid JSON: {err}")
    if not isinstance(raw, dict):
        raise _config_error(f"config file {path} must hold a JSON object")
    version = raw.pop("schema_version", None)
    if version is None:
        raise _config_error(f"config file {path} is missing 'schema_version'")
    if version != CONFIG_SCHEMA_VERSION:
        raise _config_error(
            f"config file {path} has schema_version {version!r}; "
            f"this build reads version {CONFIG_SCHEMA_VERSION}"
        )
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise _config_error(
            f"unknown {name} config fields {unknown}; allowed: {sorted(allowed)}"
        )
    merged.update(raw)
    return merged


def _override(config: dict, key: str, value) -> None:
    if value is not None:
        config[key] = value


def _expand_paths(patterns, what: str) -> list[str]:
    if isinstance(patterns, str):
        patterns = [patterns]
    paths: list[str] = []
    for pat in patterns:
        hits = sorted(globlib.glob(pat))
        if hits:
            paths.extend(hits)
        elif os.path.exists(pat):
            paths.append(pat)
        else:
            raise _io_error(f"{what} path or pattern matched nothing: {pat}")
    if not paths:
        raise _config_error(f"no {what} files configured")
    return paths


def _positive_int(config: dict, key: str) -> int:
    v = config.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
        raise _config_error(f"field {key!r} must be a positive integer, got {v!r}")
    return v


def _load_truth_record(path: str, index: int):
    from .dataset import load_records
    from .storage import StorageError

    try:
        records = load_records(path)
    except FileNotFoundError:
        raise _io_error(f"dataset not found: {path}")
    except StorageError as err:
        raise _io_error(f"cannot read dataset {path}: {err}")
    if not 0 <= index < len(records):
        raise _config_error(
            f"record index {index} out of range; {path} holds {len(records)} records"
        )
    return records[index]


# ---------------------------------------------------------------- subcommands


DATAGEN_DEFAULTS = {
    "out_dir": "data",
    "rollers": [12, 13],
    "loads": [5e3, 13e3, 17e3],
    "rpms": [0.0, 375.0, 750.0],
    "n_steps": 400,
    "warmup": 150,
    "dt": 6.667e-5,
    "n_sub": 128,
    "phase": -1.5707963267948966,
    "zeta": 0.01,
    "filter_cutoff": None,
    "double_at_step": 2500,
    "halve_at_step": 5000,
}


def cmd_datagen(args) -> int:
    config = load_config(
        args.config, DATAGEN_DEFAULTS, set(DATAGEN_DEFAULTS), "datagen"
    )
    _override(config, "out_dir", args.out)
    _override(config, "n_steps", args.steps)
    n_steps = _positive_int(config, "n_steps")
    for key in ("rollers", "loads", "rpms"):
        if not isinstance(config[key], list) or not config[key]:
            raise _config_error(f"field {key!r} must be a non-empty list")

    from .dataset import save_records
    from .sim import (
        GroundMount,
        LoadSchedule,
        OperatingCondition,
        SimulationError,
        default_geometry,
        simulate,
    )

    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for z in config["rollers"]:
        for load in config["loads"]:
            for rpm in config["rpms"]:
                geometry = default_geometry(int(z))
                condition = OperatingCondition(
                    rpm=float(rpm),
                    load=LoadSchedule(
                        base_load=(0.0, float(load)),
                        double_at_step=config["double_at_step"],
                        halve_at_step=config["halve_at_step"],
                    ),
                    dt=config["dt"],
                    mounts=GroundMount(zeta=config["zeta"]),
                    n_sub=config["n_sub"],
                )
                try:
                    record = simulate(
                        geometry,
                        condition,
                        n_steps=n_steps,
                        warmup=config["warmup"],
                        filter_cutoff=config["filter_cutoff"],
                        phase=config["phase"],
                    )
                except SimulationError as err:
                    raise CliError(
                        EXIT_DIVERGENCE,
                        "divergence",
                        f"simulation failed for z={z} load={load} rpm={rpm}: {err}",
                    )
                name = f"z{int(z)}_load{int(load)}_rpm{int(rpm)}.ds"
                path = os.path.join(out_dir, name)
                save_records(path, [record])
                written.append(path)
                print(f"wrote {path} ({n_steps} steps)")
    print(f"datagen complete: {len(written)} dataset files in {out_dir}")
    return EXIT_OK


TRAIN_DEFAULTS = {
    "model_kind": "equi_euler",
    "data": [],
    "val_data": [],
    "out": "model.ckpt",
    "log": None,
    "resume_from": None,
    "model": {},
    "train": {},
}


def cmd_train(args) -> int:
    config = load_config(args.config, TRAIN_DEFAULTS, set(TRAIN_DEFAULTS), "train")
    _override(config, "model_kind", args.model_kind)
    _override(config, "out", args.out)
    _override(config, "resume_from", args.resume_from)
    if args.data:
        config["data"] = args.data
    model_over = dict(config["model"])
    train_over = dict(config["train"])
    if args.width is not None:
        model_over["width"] = args.width
    for key, val in (
        ("lr", args.lr),
        ("total_steps", args.steps),
        ("batch_size", args.batch_size),
        ("seed", args.seed),
    ):
        if val is not None:
            train_over[key] = val

    kind = config["model_kind"]
    if kind not in ("equi_euler", "gns", "egnn", "gmn"):
        raise _config_error(
            f"unknown model_kind {kind!r}; expected one of "
            "['egnn', 'equi_euler', 'gmn', 'gns']"
        )

    from .dataset import load_records
    from .storage import StorageError

    data_paths = _expand_paths(config["data"], "training data")
    try:
        records = [r for p in data_paths for r in load_records(p)]
        val_records = None
        if config["val_data"]:
            val_paths = _expand_paths(config["val_data"], "validation data")
            val_records = [r for p in val_paths for r in load_records(p)]
    except StorageError as err:
        raise _io_error(str(err))

    model_over.setdefault("dt_sub", float(records[0].condition.dt))
    ckpt_path = config["out"]
    out_parent = os.path.dirname(ckpt_path)
    if out_parent:
        os.makedirs(out_parent, exist_ok=True)

    try:
        if kind == "equi_euler":
            from .model import ModelConfig
            from .training import TrainConfig, train

            train_config = TrainConfig(
                model=ModelConfig(**model_over),
                checkpoint_path=ckpt_path,
                log_path=config["log"],
                **train_over,
            )
            result = train(records, train_config, val_records, resume_from=config["resume_from"])
        else:
            from .baselines import (
                BaselineConfig,
                BaselineTrainConfig,
                baseline_module,
                train_baseline,
            )

            train_config = BaselineTrainConfig(
                model=BaselineConfig(**model_over),
                checkpoint_path=ckpt_path,
                log_path=config["log"],
                **train_over,
            )
            result = train_baseline(
                baseline_module(kind),
                records,
                train_config,
                val_records,
                resume_from=config["resume_from"],
            )
    except (TypeError, ValueError) as err:
        raise _config_error(f"invalid training configuration: {err}")

    last = result.history[-1] if result.history else {}
    print(
        f"trained {kind} for {train_config.total_steps} steps; "
        f"final loss {last.get('loss', float('nan')):.6g}; "
        f"checkpoint: {ckpt_path}"
    )
    return EXIT_OK


ROLLOUT_DEFAULTS = {
    "rollers": 13,
    "load": 13e3,
    "rpm": 600.0,
    "steps": 1000,
    "warmup": 150,
    "dt": 6.667e-5,
    "n_sub": 128,
    "phase": -1.5707963267948966,
    "zeta": 0.01,
    "double_at_step": 2500,
    "halve_at_step": 5000,
}


def _condition_from_config(config: dict):
    from .sim import GroundMount, LoadSchedule, OperatingCondition

    return OperatingCondition(
        rpm=float(config["rpm"]),
        load=LoadSchedule(
            base_load=(0.0, float(config["load"])),
            double_at_step=config["double_at_step"],
            halve_at_step=config["halve_at_step"],
        ),
        dt=config["dt"],
        mounts=GroundMount(zeta=config["zeta"]),
        n_sub=config["n_sub"],
    )


def cmd_rollout(args) -> int:
    config = load_config(
        args.config, ROLLOUT_DEFAULTS, set(ROLLOUT_DEFAULTS), "rollout"
    )
    for key in ("rollers", "load", "rpm", "steps", "warmup"):
        _override(config, key, getattr(args, key))
    horizon = _positive_int(config, "steps")

    from .checkpoint import load_checkpoint
    from .dataset import condition_to_dict
    from .rollout import adapter_from_checkpoint, rollout, save_rollout
    from .sim import default_geometry, simulate
    from .storage import StorageError

    try:
        ckpt = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise _io_error(f"checkpoint not found: {args.checkpoint}")
    except StorageError as err:
        raise _io_error(f"cannot read checkpoint {args.checkpoint}: {err}")

    geometry = default_geometry(int(config["rollers"]))
    condition = _condition_from_config(config)
    adapter = adapter_from_checkpoint(ckpt, geometry, condition)
    if horizon % adapter.stride != 0:
        raise _config_error(
            f"steps ({horizon}) must be a multiple of the model stride "
            f"({adapter.stride})"
        )
    warm = simulate(geometry, condition, n_steps=1, warmup=config["warmup"],
                    phase=config["phase"])
    result = rollout(
        adapter,
        warm.state_at(0),
        condition,
        horizon,
        raise_on_divergence=False,
    )
    save_rollout(
        args.out,
        result,
        extra={
            "condition": condition_to_dict(condition),
            "geometry": asdict(geometry),
            "warmup": config["warmup"],
            "phase": config["phase"],
        },
    )
    if result.diverged_at is not None:
        print(
            f"rollout diverged at step {result.diverged_at}; partial result "
            f"({result.n_instants} instants) saved to {args.out}",
            file=sys.stderr,
        )
        return EXIT_DIVERGENCE
    print(
        f"rolled out {result.kind} for {horizon} steps "
        f"({result.n_instants} instants); saved to {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    from .dataset import condition_to_dict
    from .plots import angle_curves, polar_load_plot, rmse_curves
    from .rollout import (
        export_curves_csv,
        export_summary_json,
        load_rollout,
        metrics,
        polar_forces,
    )
    from .storage import StorageError

    try:
        result = load_rollout(args.rollout)
    except FileNotFoundError:
        raise _io_error(f"rollout file not found: {args.rollout}")
    except StorageError as err:
        raise _io_error(f"cannot read rollout {args.rollout}: {err}")
    record = _load_truth_record(args.truth, args.record_index)

    if result.instants[-1] >= record.n_steps:
        raise _config_error(
            f"rollout horizon {int(result.instants[-1])} exceeds the truth "
            f"record ({record.n_steps} steps)"
        )
    import numpy as np

    start_gap = float(np.abs(result.x_re[0] - record.arrays["x_re"][0]).max())
    if start_gap > 1e-9:
        raise _config_error(
            "rollout and truth record do not share an initial state "
            f"(max roller-position gap {start_gap:.3e} m); check that the "
            "operating condition, warmup, and phase match the dataset"
        )
    rep = metrics(result, record, angle_bin_width=args.angle_bin_width)

    os.makedirs(args.out_dir, exist_ok=True)
    name = result.kind
    export_curves_csv(os.path.join(args.out_dir, "curves.csv"), {name: rep})
    export_summary_json(
        os.path.join(args.out_dir, "summary.json"), {name: rep.summary}
    )
    rmse_curves(os.path.join(args.out_dir, "rmse_curves.svg"), {name: rep})
    angle_curves(os.path.join(args.out_dir, "angle_curves.svg"), {name: rep})
    for instant in args.polar_at or []:
        try:
            snap = polar_forces(result, record, instant)
        except ValueError as err:
            raise _config_error(str(err))
        polar_load_plot(
            os.path.join(args.out_dir, f"polar_{instant}.svg"), {name: snap}
        )
    print(json.dumps({name: rep.summary}, indent=2, sort_keys=True))
    return EXIT_OK


COMPARE_DEFAULTS = {
    "checkpoints": {},
    "truth": None,
    "record_index": 0,
    "horizon": 225,
    "out_dir": "comparison",
    "angle_bin_width": 0.1,
    "include_oracle": False,
    "polar_at": [],
}


def cmd_compare(args) -> int:
    config = load_config(
        args.config, COMPARE_DEFAULTS, set(COMPARE_DEFAULTS), "compare"
    )
    _override(config, "truth", args.truth)
    _override(config, "horizon", args.horizon)
    _override(config, "out_dir", args.out_dir)
    if not config["checkpoints"]:
        raise _config_error("compare config needs a non-empty 'checkpoints' map")
    if config["truth"] is None:
        raise _config_error("compare needs a truth dataset ('truth' field or --truth)")
    horizon = _positive_int(config, "horizon")

    from .checkpoint import load_checkpoint
    from .graph import fit_normalization
    from .plots import angle_curves, polar_load_plot, rmse_curves
    from .rollout import (
        SimOracleAdapter,
        adapter_from_checkpoint,
        compare,
        export_curves_csv,
        export_summary_json,
        polar_forces,
    )
    from .storage import StorageError

    record = _load_truth_record(config["truth"], config["record_index"])
    if horizon >= record.n_steps:
        raise _config_error(
            f"horizon {horizon} exceeds the truth record ({record.n_steps} steps)"
        )

    adapters = {}
    for name, path in config["checkpoints"].items():
        try:
            ckpt = load_checkpoint(path)
        except FileNotFoundError:
            raise _io_error(f"checkpoint not found: {path}")
        except StorageError as err:
            raise _io_error(f"cannot read checkpoint {path}: {err}")
        adapters[name] = adapter_from_checkpoint(
            ckpt, record.geometry, record.condition
        )
    strides = {a.stride for a in adapters.values()}
    if len(strides) > 1:
        raise _config_error(
            f"models must share one stride to be compared on common instants; "
            f"got strides {sorted(strides)}"
        )
    stride = strides.pop()
    if horizon % stride != 0:
        raise _config_error(
            f"horizon ({horizon}) must be a multiple of the shared stride ({stride})"
        )
    oracle_stats = None
    if config["include_oracle"]:
        oracle_stats = fit_normalization([record])
        adapters["oracle"] = SimOracleAdapter(
            record.geometry, record.condition, stride
        )

    out = compare(
        adapters,
        record,
        horizon,
        stats=oracle_stats,
        angle_bin_width=config["angle_bin_width"],
    )

    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    export_curves_csv(os.path.join(out_dir, "curves.csv"), out["metrics"])
    export_summary_json(os.path.join(out_dir, "summary.json"), out["summary"])
    rmse_curves(os.path.join(out_dir, "rmse_curves.svg"), out["metrics"])
    angle_curves(os.path.join(out_dir, "angle_curves.svg"), out["metrics"])
    for instant in config["polar_at"]:
        snaps = {}
        for name, res in out["results"].items():
            try:
                snaps[name] = polar_forces(res, record, instant)
            except ValueError:
                continue  # model diverged before this instant
        if snaps:
            polar_load_plot(os.path.join(out_dir, f"polar_{instant}.svg"), snaps)

    print(json.dumps(out["summary"], indent=2, sort_keys=True))
    print(f"comparison artifacts written to {out_dir}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    from .checkpoint import load_checkpoint
    from .rollout import load_rollout
    from .dataset import load_records
    from .storage import StorageError, read_container

    status = EXIT_OK
    for path in args.paths:
        try:
            header, arrays = read_container(path)
            kind = header.get("kind")
            info = {
                "path": path,
                "kind": kind,
                "schema_version": header.get("schema_version"),
                "n_arrays": len(arrays),
            }
            if kind == "dataset":
                records = load_records(path)
                info["records"] = [
                    {
                        "n_steps": r.n_steps,
                        "n_rollers": r.geometry.n_rollers,
                        "rpm": r.condition.rpm,
                        "base_load": list(r.condition.load.base_load),
                        "dt": r.condition.dt,
                        "warmup": r.warmup,
                    }
                    for r in records
                ]
            elif kind == "checkpoint":
                ckpt = load_checkpoint(path)
                info.update(
                    model_kind=ckpt.model_kind,
                    step=ckpt.step,
                    config=ckpt.config,
                    n_parameter_groups=len(ckpt.params),
                )
            elif kind == "rollout":
                result = load_rollout(path)
                info.update(
                    model_kind=result.kind,
                    stride=result.stride,
                    n_instants=result.n_instants,
                    horizon=int(result.instants[-1]),
                    diverged_at=result.diverged_at,
                )
            else:
                raise StorageError(f"unknown container kind {kind!r}")
            print(json.dumps(info, indent=2, sort_keys=True))
        except FileNotFoundError:
            print(f"bearnet: error: io: file not found: {path}", file=sys.stderr)
            status = EXIT_IO
        except StorageError as err:
            print(f"bearnet: error: io: {path}: {err}", file=sys.stderr)
            status = EXIT_IO
    return status


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bearnet",
        description=(
            "Bearing dynamics with equivariant graph networks: generate "
            "reference data, train models, roll them out, and compare them."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="simulate a condition grid into dataset files")
    p.add_argument("--config", help="JSON config (see datagen defaults)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--steps", type=int, help="recorded steps per condition")
    p.set_defaults(handler=cmd_datagen)

    p = sub.add_parser("train", help="train a model on dataset files")
    p.add_argument("--config", help="JSON config with data paths and hyperparameters")
    p.add_argument("--model-kind", choices=["equi_euler", "gns", "egnn", "gmn"])
    p.add_argument("--data", nargs="+", help="dataset files or globs (overrides config)")
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--resume-from", help="checkpoint to resume")
    p.add_argument("--width", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int, help="total optimizer steps")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("rollout", help="roll a trained model forward in time")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="rollout container output path")
    p.add_argument("--config", help="JSON config for the operating condition")
    p.add_argument("--rollers", type=int)
    p.add_argument("--load", type=float, help="radial load magnitude [N]")
    p.add_argument("--rpm", type=float)
    p.add_argument("--steps", type=int, help="rollout horizon in recording steps")
    p.add_argument("--warmup", type=int, help="simulator warmup before the start state")
    p.set_defaults(handler=cmd_rollout)

    p = sub.add_parser("eval", help="score a rollout against a truth dataset")
    p.add_argument("--rollout", required=True)
    p.add_argument("--truth", required=True, help="dataset file with the ground truth")
    p.add_argument("--record-index", type=int, default=0)
    p.add_argument("--out-dir", default="evaluation")
    p.add_argument("--angle-bin-width", type=float, default=0.1)
    p.add_argument(
        "--polar-at", type=int, action="append",
        help="emit a polar load plot at this instant (repeatable)",
    )
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("compare", help="roll several checkpoints on one condition")
    p.add_argument("--config", required=True, help="JSON config with a checkpoints map")
    p.add_argument("--truth", help="truth dataset (overrides config)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("inspect", help="validate and dump container headers")
    p.add_argument("paths", nargs="+", help="dataset/checkpoint/rollout files")
    p.set_defaults(handler=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _apply_thread_env()
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.handler(args)
    except CliError as err:
        print(f"bearnet: error: {err.category}: {err}", file=sys.stderr)
        return err.code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
