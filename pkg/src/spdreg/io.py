"""JSON file formats for matrices, clouds, datasets, models, transforms and maps.

Floats are serialized with full repr precision, so load(save(x)) reproduces
x bitwise. Writers never embed timestamps: regenerating a file from the
same inputs yields identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .baseline import EvalReport, NnTransferMap
from .kinematics import SerialManipulator, builtin_models
from .registration import RigidSpdTransform
from .spd import SpdCloud, check_symmetric, symmetrize

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ["schema", "experiment", "variant", "weight_exp", "samples", "eval_set", "seed", "rmse", "iterations"]


def dump_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def matrix_to_dict(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=float)
    return {"dim": m.shape[0], "rows": m.tolist()}


def matrix_from_dict(doc: dict) -> np.ndarray:
    m = np.asarray(doc["rows"], dtype=float)
    dim = int(doc["dim"])
    if m.shape != (dim, dim):
        raise ValueError(f"matrix rows have shape {m.shape}, expected ({dim}, {dim})")
    check_symmetric(m, tol=1e-9, name="serialized matrix")
    return symmetrize(m)


def cloud_to_dict(cloud: SpdCloud) -> dict:
    return {
        "points": [matrix_to_dict(p) for p in cloud.points],
        "labels": list(cloud.labels) if cloud.labels is not None else None,
    }


def cloud_from_dict(doc: dict) -> SpdCloud:
    points = np.stack([matrix_from_dict(p) for p in doc["points"]])
    labels = doc.get("labels")
    return SpdCloud(points, tuple(labels) if labels is not None else None)


def save_dataset(path: str | Path, cloud: SpdCloud, model: str | None = None,
                 seed: int | None = None, protocol: str | None = None,
                 invocation: list[str] | None = None) -> None:
    doc = {"model": model, "seed": seed, "protocol": protocol}
    doc.update(cloud_to_dict(cloud))
    if invocation is not None:
        doc["invocation"] = invocation
    dump_json(path, doc)


def load_dataset(path: str | Path) -> tuple[SpdCloud, dict]:
    doc = load_json(path)
    cloud = cloud_from_dict(doc)
    meta = {k: doc.get(k) for k in ("model", "seed", "protocol", "invocation")}
    return cloud, meta


def save_model(path: str | Path, model: SerialManipulator) -> None:
    dump_json(path, model.to_dict())


def load_model(path: str | Path) -> SerialManipulator:
    return SerialManipulator.from_dict(load_json(path))


def resolve_model(name_or_path: str) -> SerialManipulator:
    """Look up a built-in model by name, else load a model JSON file."""
    models = builtin_models()
    if name_or_path in models:
        return models[name_or_path]
    path = Path(name_or_path)
    if path.exists():
        return load_model(path)
    raise ValueError(
        f"unknown model {name_or_path!r}: not a built-in ({', '.join(sorted(models))}) and no such file"
    )


def save_transform(path: str | Path, transform: RigidSpdTransform,
                   invocation: list[str] | None = None) -> None:
    doc = transform.to_dict()
    if invocation is not None:
        doc["invocation"] = invocation
    dump_json(path, doc)


def load_transform(path: str | Path) -> RigidSpdTransform:
    return RigidSpdTransform.from_dict(load_json(path))


def transform_hash(path: str | Path) -> str:
    """Hash of the canonical transform content (provenance stripped)."""
    doc = load_json(path)
    doc.pop("invocation", None)
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def save_nn_map(path: str | Path, nn_map: NnTransferMap, invocation: list[str] | None = None) -> None:
    doc = nn_map.to_dict()
    if invocation is not None:
        doc["invocation"] = invocation
    dump_json(path, doc)


def load_nn_map(path: str | Path) -> NnTransferMap:
    return NnTransferMap.from_dict(load_json(path))


def eval_csv_row(report: EvalReport, experiment: str, variant: str, weight_exp: int,
                 samples: int, eval_set: str, seed: int) -> dict:
    return {
        "schema": CSV_SCHEMA_VERSION,
        "experiment": experiment,
        "variant": variant,
        "weight_exp": weight_exp,
        "samples": samples,
        "eval_set": eval_set,
        "seed": seed,
        "rmse": repr(float(report.rmse)),
        "iterations": report.iterations if report.iterations is not None else "",
    }


def write_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
