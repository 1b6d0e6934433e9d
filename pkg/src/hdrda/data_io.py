"""Delimited-text datasets, BSS/WSS feature ranking and model files.

Model file layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"HDRDAMDL"
    8       4     uint32 format version
    12      8     uint64 header length H
    20      H     UTF-8 JSON header (sorted keys, no whitespace)
    20+H    ...   payload: float64 little-endian arrays, C order, back to back

The header records the scalar parameters, the class labels and, for every
array, its name, shape and byte offset within the payload. The header's
``payload_bytes`` must equal the number of bytes after it.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import (
    BadCount,
    CorruptFile,
    InputError,
    MissingLabel,
    NonNumericFeature,
    ParseError,
    VersionMismatch,
)
from .estimator import ClassFactor, HdrdaModel, Parameterization
from .reduction import ReducedSubspace

MAGIC = b"HDRDAMDL"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")


# --------------------------------------------------------------------------
# Datasets
# --------------------------------------------------------------------------

def read_table(path, label_column="label", delimiter: str = ",", require_label: bool = True):
    """Parse a delimited file with a header row.

    ``label_column`` is a header name or a 0-based column index. When
    ``require_label`` is false and a named label column is absent, every
    column is read as a feature. Error locations are 1-based file line and
    column numbers (the header is line 1).

    Returns
    -------
    x : ndarray of shape (N, p)
    labels : list of str, or None
    feature_names : list of str
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", path=path) from None
        if isinstance(label_column, str):
            label_idx = header.index(label_column) if label_column in header else None
            if label_idx is None and require_label:
                raise MissingLabel(f"no column named {label_column!r} in header", row=1, path=path)
        else:
            label_idx = int(label_column)
            if not (0 <= label_idx < len(header)):
                raise MissingLabel(f"label column index {label_idx} out of range", row=1, path=path)
        feature_idx = [j for j in range(len(header)) if j != label_idx]

        rows, labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(record)}",
                                 row=line_no, path=path)
            if label_idx is not None:
                label = record[label_idx].strip()
                if not label:
                    raise MissingLabel("empty class label", row=line_no, column=label_idx + 1, path=path)
                labels.append(label)
            values = []
            for j in feature_idx:
                try:
                    values.append(float(record[j]))
                except ValueError:
                    raise NonNumericFeature(f"non-numeric value {record[j]!r}",
                                            row=line_no, column=j + 1, path=path) from None
            rows.append(values)

    if not rows:
        raise ParseError("file has no observations", path=path)
    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_idx))
    return x, (labels if label_idx is not None else None), [header[j] for j in feature_idx]


def read_dataset(path, label_column="label", delimiter: str = ",") -> LabeledDataset:
    """Read a labeled dataset; classes are indexed in order of first appearance."""
    x, labels, names = read_table(path, label_column, delimiter)
    return LabeledDataset.from_labels(x, labels, list(dict.fromkeys(labels)), names)


def write_dataset(path, data: LabeledDataset, label_column: str = "label", delimiter: str = ",",
                  feature_names=None) -> None:
    """Write ``data`` with the label in the last column.

    Floats are written with ``repr``, which round-trips exactly.
    """
    if feature_names is None:
        feature_names = data.feature_names or [f"x{j + 1}" for j in range(data.p)]
    labels = data.classes[data.labels]
    with _atomic(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow([*feature_names, label_column])
        for row, label in zip(data.observations.tolist(), labels.tolist()):
            writer.writerow([*map(repr, row), label])


# --------------------------------------------------------------------------
# Feature ranking
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeatureRanking:
    scores: np.ndarray
    order: np.ndarray  # 0-based feature indices, best first


def bss_wss_ranking(data: LabeledDataset) -> FeatureRanking:
    """Rank features by the ratio of between-class to within-class sum of
    squares (Dudoit, Fridlyand and Speed, 2002).

    A zero within-class sum gives ``inf`` when the between-class sum is
    positive and ``0`` when it is also zero. Ties keep feature order.
    """
    if data.k < 2:
        raise InputError("feature ranking needs at least two classes")
    x = data.observations
    grand = x.mean(axis=0)
    means = np.zeros((data.k, data.p))
    np.add.at(means, data.labels, x)
    means /= data.class_counts[:, None]
    bss = data.class_counts @ (means - grand) ** 2
    wss = np.sum((x - means[data.labels]) ** 2, axis=0)
    # Sums below this are round-off, not signal.
    floor = 1e-12 * np.sum((x - grand) ** 2, axis=0)
    bss = np.where(bss <= floor, 0.0, bss)
    wss = np.where(wss <= floor, 0.0, wss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(wss > 0, bss / np.where(wss > 0, wss, 1.0),
                          np.where(bss > 0, np.inf, 0.0))
    order = np.argsort(-scores, kind="stable")
    return FeatureRanking(scores, order)


def select_features(data: LabeledDataset, ranking: FeatureRanking, m: int):
    """Keep the ``m`` best-ranked features, in their original column order.

    Returns the reduced dataset and the kept column indices; apply the same
    indices to held-out data with ``LabeledDataset.with_columns``.
    """
    if not (1 <= m <= data.p):
        raise BadCount(f"number of features must lie in [1, {data.p}], got {m}")
    kept = np.sort(ranking.order[:m])
    return data.with_columns(kept), kept


# --------------------------------------------------------------------------
# Model persistence
# --------------------------------------------------------------------------

class _atomic:
    """Open a temporary file next to ``path``; rename it over ``path`` on success."""

    def __init__(self, path, mode, **kwargs):
        self.path = Path(path)
        self.mode = mode
        self.kwargs = kwargs

    def __enter__(self):
        fd, self.tmp = tempfile.mkstemp(dir=self.path.parent or ".", prefix=f".{self.path.name}.")
        self.fh = os.fdopen(fd, self.mode, **self.kwargs)
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False


def _label_to_json(value):
    if isinstance(value, np.generic):
        value = value.item()
    if not isinstance(value, (str, int, float, bool)):
        raise InputError(f"class label {value!r} cannot be stored in a model file")
    return value


def model_to_bytes(model: HdrdaModel) -> bytes:
    sub = model.subspace
    arrays = {
        "u1": sub.u1,
        "d_q": sub.d_q,
        "between": sub.between,
        "means": np.stack([f.mean_full for f in model.factors]),
        "means_projected": np.stack([f.mean_projected for f in model.factors]),
        "gamma_diag": np.stack([f.gamma_diag for f in model.factors]),
        "w_inverse": np.stack([f.w_inverse for f in model.factors]),
        "log_det_w": np.array([f.log_det_w for f in model.factors]),
    }
    manifest, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format": "hdrda-model",
        "parameterization": model.parameterization.value,
        "lambda": model.lambda_,
        "gamma": model.gamma,
        "tolerance": sub.tolerance,
        "p": sub.p,
        "q": sub.q,
        "k": model.k,
        "classes": [_label_to_json(c) for c in model.classes],
        "arrays": manifest,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(blob)) + blob + b"".join(chunks)


def model_from_bytes(raw: bytes) -> HdrdaModel:
    if len(raw) < _PREAMBLE.size:
        raise CorruptFile("file is shorter than the fixed preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptFile("not an HDRDA model file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise VersionMismatch(version, FORMAT_VERSION)
    start = _PREAMBLE.size + header_len
    if len(raw) < start:
        raise CorruptFile("header is truncated")
    try:
        header = json.loads(raw[_PREAMBLE.size:start].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"header is not valid JSON: {exc}") from None
    payload = raw[start:]
    try:
        if len(payload) != header["payload_bytes"]:
            raise CorruptFile(f"payload has {len(payload)} bytes, header declares "
                              f"{header['payload_bytes']}")
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            end = entry["offset"] + 8 * count
            if entry["offset"] < 0 or end > len(payload):
                raise CorruptFile(f"array {entry['name']!r} runs past the end of the file")
            arrays[entry["name"]] = np.frombuffer(
                payload, dtype="<f8", count=count, offset=entry["offset"]).reshape(shape).astype(np.float64)
        p, q, k = header["p"], header["q"], header["k"]
        expected = {"u1": (p, q), "d_q": (q,), "means": (k, p), "means_projected": (k, q),
                    "gamma_diag": (k, q), "w_inverse": (k, q, q), "log_det_w": (k,)}
        for name, shape in expected.items():
            if arrays[name].shape != shape:
                raise CorruptFile(f"array {name!r} has shape {arrays[name].shape}, expected {shape}")
        if arrays["between"].shape[0] != p or len(header["classes"]) != k:
            raise CorruptFile("inconsistent dimensions in header")
        sub = ReducedSubspace(arrays["u1"], arrays["d_q"], header["tolerance"], arrays["between"])
        factors = tuple(
            ClassFactor(arrays["gamma_diag"][j], arrays["w_inverse"][j], float(arrays["log_det_w"][j]),
                        arrays["means_projected"][j], arrays["means"][j])
            for j in range(k)
        )
        return HdrdaModel(sub, factors, header["lambda"], header["gamma"],
                          Parameterization(header["parameterization"]), np.array(header["classes"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorruptFile):
            raise
        raise CorruptFile(f"malformed model file: {exc!r}") from None


def save_model(model: HdrdaModel, path) -> None:
    """Write ``model`` atomically (temporary file, then rename)."""
    with _atomic(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> HdrdaModel:
    return model_from_bytes(Path(path).read_bytes())
