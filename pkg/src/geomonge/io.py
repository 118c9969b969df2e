"""File formats: space JSON, measure CSV, plan/rays JSON, reports."""

import csv
import json
from pathlib import Path

import numpy as np

from .kantorovich import DiscreteMeasure, TransportPlan
from .space import FiniteGeodesicSpace

SCHEMA_VERSION = "1.0"


def _enc_matrix(M):
    return [["inf" if not np.isfinite(v) else float(v) for v in row] for row in np.asarray(M)]


def _dec_matrix(rows):
    return np.array([[np.inf if v in ("inf", "Infinity") else float(v) for v in row] for row in rows], dtype=np.float64)


def space_to_json(space, embed_meta=True):
    out = {"n": space.n, "d": _enc_matrix(space.d), "dL": _enc_matrix(space.dL), "tol": space.tol}
    if space.labels is not None:
        out["labels"] = space.labels.tolist()
    if embed_meta and space.meta:
        out["meta"] = {k: v for k, v in space.meta.items() if k not in ("c_index", "branch_index")}
    return out


def space_from_json(data):
    n = int(data["n"])
    labels = data.get("labels")
    dL = _dec_matrix(data["dL"])
    if data.get("metric") == "euclidean":
        if labels is None:
            raise ValueError("metric 'euclidean' needs labels")
        lab = np.asarray(labels, dtype=np.float64)
        d = np.linalg.norm(lab[:, None, :] - lab[None, :, :], axis=-1)
    else:
        d = _dec_matrix(data["d"])
    if d.shape != (n, n):
        raise ValueError(f"matrix shape {d.shape} does not match n={n}")
    return FiniteGeodesicSpace(d, dL, tol=float(data.get("tol", 1e-9)), labels=labels, meta=dict(data.get("meta", {})))


def load_space(path):
    return space_from_json(json.loads(Path(path).read_text()))


def read_measure(path, n):
    """CSV with header ``point_index,weight``; repeated indices add up."""
    w = np.zeros(n)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            w[int(row["point_index"])] += float(row["weight"])
    return DiscreteMeasure(w)


def write_measure(path, mu):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["point_index", "weight"])
        for i, m in mu.atoms():
            wr.writerow([i, repr(m)])


def load_plan(path, n):
    return TransportPlan.from_json(n, json.loads(Path(path).read_text()))


def load_point_set(path):
    """A JSON list of point indices, or an object with a ``points`` list."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data["points"]
    return sorted(int(p) for p in data)


def dumps(obj):
    """Stable JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
