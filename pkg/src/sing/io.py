"""Matrix file I/O.

Two formats are supported:

* CSV with a header row of feature ids (``f0, f1, ...`` when written here);
* raw little-endian float64 ``.bin`` files with a JSON sidecar
  ``<name>.bin.json`` holding ``{"rows", "cols", "layout": "row-major"}``.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def write_matrix(path, A, header=None) -> Path:
    path = Path(path)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if path.suffix == ".bin":
        A.astype("<f8").tofile(path)
        sidecar = {"rows": A.shape[0], "cols": A.shape[1], "layout": "row-major"}
        Path(str(path) + ".json").write_text(json.dumps(sidecar))
        return path
    names = header if header is not None else [f"f{j}" for j in range(A.shape[1])]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in A:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def read_matrix(path) -> np.ndarray:
    """Load a CSV (header row required) or ``.bin`` matrix."""
    path = Path(path)
    if path.suffix == ".bin":
        meta = json.loads(Path(str(path) + ".json").read_text())
        if meta.get("layout", "row-major") != "row-major":
            raise ValueError(f"unsupported layout {meta['layout']!r}")
        data = np.fromfile(path, dtype="<f8")
        if data.size != meta["rows"] * meta["cols"]:
            raise ValueError("binary file size does not match its sidecar")
        return data.reshape(meta["rows"], meta["cols"]).astype(float)
    A = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return A


def digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
