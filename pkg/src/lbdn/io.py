"""JSON and CSV serialization for models, weights, reports and metrics.

Every JSON document carries ``format_version``; readers accept any minor
revision of a known major version. Floats are written with ``repr`` (the
shortest round-tripping form), so a write/read cycle is exact.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .circconv import ConvParams
from .exceptions import FormatVersionError
from .sandwich import DirectParams, ExplicitWeights, LayerParams

FORMAT_VERSION = "1.0"
SUPPORTED_MAJOR = 1


def _check_version(doc):
    version = doc.get("format_version") if isinstance(doc, dict) else None
    if version is None:
        raise FormatVersionError("document has no format_version")
    try:
        major = int(str(version).split(".")[0])
    except ValueError:
        raise FormatVersionError(f"unparseable format_version {version!r}") from None
    if major != SUPPORTED_MAJOR:
        raise FormatVersionError(f"unsupported format_version {version!r} (major {SUPPORTED_MAJOR} expected)")


def _tolist(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def _array(x):
    return None if x is None else np.asarray(x, dtype=float)


def params_to_dict(params):
    return {
        "format_version": FORMAT_VERSION,
        "kind": "model",
        "gamma": float(params.gamma),
        "activation": params.activation,
        "layers": [
            {"d": _tolist(lp.d), "X": _tolist(lp.X), "Y": _tolist(lp.Y), "b": _tolist(lp.b),
             "g": float(lp.g), "h": float(lp.h)}
            for lp in params.layers
        ],
    }


def params_from_dict(doc):
    _check_version(doc)
    layers = []
    for lay in doc["layers"]:
        b = np.asarray(lay["b"], dtype=float).reshape(-1)
        m = b.size
        layers.append(LayerParams(
            X=np.asarray(lay["X"], dtype=float).reshape(m, m),
            Y=np.asarray(lay["Y"], dtype=float).reshape(-1, m),
            b=b, g=float(lay["g"]), h=float(lay["h"]), d=_array(lay.get("d")),
        ))
    return DirectParams(gamma=float(doc["gamma"]), layers=layers, activation=doc.get("activation", "relu"))


def weights_to_dict(weights):
    return {
        "format_version": FORMAT_VERSION,
        "kind": "weights",
        "gamma": float(weights.gamma),
        "activation": weights.activation,
        "W": [_tolist(W) for W in weights.W],
        "b": [_tolist(b) for b in weights.b],
        "Lambda": [_tolist(lam) for lam in weights.Lambda],
    }


def weights_from_dict(doc):
    _check_version(doc)
    b = [np.asarray(x, dtype=float).reshape(-1) for x in doc["b"]]
    W = [np.asarray(x, dtype=float).reshape(bk.size, -1) for x, bk in zip(doc["W"], b)]
    return ExplicitWeights(
        gamma=float(doc["gamma"]), W=W, b=b,
        Lambda=[np.asarray(x, dtype=float).reshape(-1) for x in doc["Lambda"]],
        activation=doc.get("activation", "relu"),
    )


def conv_to_dict(params):
    return {"P": _tolist(params.P), "d": _tolist(params.d), "b": _tolist(params.b)}


def conv_from_dict(doc):
    return ConvParams(P=np.asarray(doc["P"], dtype=float), d=doc["d"], b=doc["b"])


def dumps(doc):
    return json.dumps(doc, indent=1)


def write_json(path, doc):
    Path(path).write_text(dumps(doc) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc


def save_params(path, params):
    write_json(path, params_to_dict(params))


def load_params(path):
    return params_from_dict(read_json(path))


def save_weights(path, weights):
    write_json(path, weights_to_dict(weights))


def load_weights(path):
    return weights_from_dict(read_json(path))


def load_document(path):
    """Read either a model or a weights document; returns ``(kind, object)``."""
    doc = read_json(path)
    _check_version(doc)
    kind = doc.get("kind", "weights" if "W" in doc else "model")
    if kind == "weights":
        return kind, weights_from_dict(doc)
    if kind == "model":
        return kind, params_from_dict(doc)
    raise ValueError(f"{path}: unknown document kind {kind!r}")


def write_csv(path, rows, columns=None):
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: repr(v) if isinstance(v, float) else v for c, v in row.items()})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


METRIC_COLUMNS = ("epoch", "lr", "train_mse", "test_mse", "tightness")


def write_metrics(path, metrics):
    write_csv(path, metrics, list(METRIC_COLUMNS))
