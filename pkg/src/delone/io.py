"""Serialization of point sets, rules, schemes and reports.

JSON is the primary format; CSV is point-list only.  Floats are written
with 17 significant digits so a round trip is bit-exact.
"""

import csv
import dataclasses
import json

import numpy as np

from .core import WindowedDeloneSet, build_windowed_set
from .errors import InputError


def _floats(arr):
    return [[float(x) for x in row] for row in np.asarray(arr, dtype=float)]


class _NumpyEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (set, frozenset)):
            return sorted(o)
        if dataclasses.is_dataclass(o):
            return {k: v for k, v in dataclasses.asdict(o).items()
                    if not k.startswith("_")}
        return super().default(o)


def dump_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, cls=_NumpyEncoder, indent=1, sort_keys=True)
        fh.write("\n")


def point_set_to_dict(X: WindowedDeloneSet) -> dict:
    out = {
        "dim": X.dim,
        "window_radius": X.window_radius,
        "points": _floats(X.points),
    }
    if X.labels is not None:
        out["labels"] = [int(x) for x in X.labels]
    if X.r_declared is not None:
        out["r"] = float(X.r_declared)
    if X.R_declared is not None:
        out["R"] = float(X.R_declared)
    meta = {k: v for k, v in X.meta.items() if not k.startswith("_")}
    if meta:
        out["meta"] = json.loads(json.dumps(meta, cls=_NumpyEncoder))
    return out


def point_set_from_dict(data: dict) -> WindowedDeloneSet:
    try:
        dim = int(data["dim"])
        w = float(data["window_radius"])
        pts = np.asarray(data["points"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed point-set data: {exc}")
    labels = data.get("labels")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
    return build_windowed_set(
        pts, dim, w, labels=labels,
        r_declared=data.get("r"), R_declared=data.get("R"),
        meta=data.get("meta"))


def save_point_set(X: WindowedDeloneSet, path: str) -> None:
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            header = [f"x{k}" for k in range(X.dim)]
            if X.labels is not None:
                header.append("label")
            wr.writerow(["# dim", X.dim, "window_radius",
                         repr(X.window_radius)])
            wr.writerow(header)
            for i, p in enumerate(X.points):
                row = [f"{c:.17g}" for c in p]
                if X.labels is not None:
                    row.append(int(X.labels[i]))
                wr.writerow(row)
        return
    dump_json(point_set_to_dict(X), path)


def load_point_set(path: str) -> WindowedDeloneSet:
    if path.endswith(".csv"):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3 or not rows[0] or rows[0][0] != "# dim":
            raise InputError(f"{path}: missing csv header")
        dim = int(rows[0][1])
        w = float(rows[0][3])
        has_label = rows[1][-1] == "label"
        pts, labels = [], []
        for row in rows[2:]:
            if not row:
                continue
            pts.append([float(c) for c in row[:dim]])
            if has_label:
                labels.append(int(row[dim]))
        return build_windowed_set(pts, dim, w,
                                  labels=labels if has_label else None)
    with open(path) as fh:
        return point_set_from_dict(json.load(fh))


def rule_to_dict(rule) -> dict:
    entries = []
    for i, cls in enumerate(rule.classes):
        rep = cls.representative
        entry = {
            "class_offsets": _floats(rep.offsets),
            "image_offsets": _floats(rule.image_offsets[i]),
        }
        if rep.labels is not None:
            entry["class_labels"] = [int(x) for x in rep.labels]
        if cls.center_rep_offset is not None:
            entry["center_offset"] = [float(x) for x in cls.center_rep_offset]
        if rule.image_labels is not None:
            entry["image_labels"] = [int(x) for x in rule.image_labels[i]]
        entries.append(entry)
    return {"radius": rule.radius, "name": rule.name, "entries": entries}


def rule_from_dict(data: dict):
    from .core import Patch, PatchClass, quantized_key
    from .derivation import LocalDerivationRule

    try:
        radius = float(data["radius"])
        entries = data["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed rule data: {exc}")
    classes, img_offs, img_labels = [], [], []
    any_labels = any("image_labels" in e for e in entries)
    for e in entries:
        offs = np.asarray(e["class_offsets"], dtype=float)
        labels = e.get("class_labels")
        labels = np.asarray(labels, dtype=np.int64) if labels is not None else None
        rep = Patch(center=np.zeros(offs.shape[1]), radius=radius,
                    offsets=offs, labels=labels)
        key = quantized_key(offs)
        if labels is not None:
            key = key + tuple(int(x) for x in labels)
        ctr = e.get("center_offset")
        cls = PatchClass(representative=rep, quantized_key=key,
                         center_rep_offset=np.asarray(ctr, dtype=float)
                         if ctr is not None else None)
        classes.append(cls)
        img_offs.append(np.asarray(e["image_offsets"], dtype=float))
        img_labels.append(
            np.asarray(e["image_labels"], dtype=np.int64)
            if "image_labels" in e else None)
    if any_labels and any(l is None for l in img_labels):
        raise InputError("rule mixes labeled and unlabeled image entries")
    return LocalDerivationRule(
        radius=radius, classes=classes, image_offsets=img_offs,
        image_labels=img_labels if any_labels else None,
        name=data.get("name", "rule"))


def save_rule(rule, path: str) -> None:
    dump_json(rule_to_dict(rule), path)


def load_rule(path: str):
    with open(path) as fh:
        return rule_from_dict(json.load(fh))


def report_to_dict(report) -> dict:
    if dataclasses.is_dataclass(report):
        return json.loads(json.dumps(report, cls=_NumpyEncoder))
    return report


def save_report(report, path: str) -> None:
    dump_json(report_to_dict(report), path)
