"""Serialization of dense user x item matrices.

Two interchangeable forms:

* CSV: header row of item ids, leading column of user ids, values printed
  with 10 significant digits (lossy round-trip at that precision),
* binary: two little-endian uint64 dims followed by row-major little-endian
  float64 values (bit-exact round-trip).
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

_BIN_DIMS = np.dtype("<u8")
_BIN_VALS = np.dtype("<f8")


def save_matrix_csv(path, values: np.ndarray, user_ids, item_ids) -> None:
    values = np.asarray(values)
    if values.shape != (len(user_ids), len(item_ids)):
        raise ValueError(f"matrix shape {values.shape} != id lists")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user," + ",".join(str(d) for d in item_ids) + "\n")
        for uid, row in zip(user_ids, values):
            fh.write(str(uid) + "," + ",".join(f"{v:.10g}" for v in row) + "\n")


def load_matrix_csv(path):
    """Returns (values, user_ids, item_ids); ids come back as strings."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "user":
            raise DataError(f"{path}: missing 'user' header column")
        item_ids = header[1:]
        user_ids, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(item_ids) + 1:
                raise DataError(f"{path}:{lineno}: expected {len(item_ids) + 1} fields")
            user_ids.append(parts[0])
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows, dtype=np.float64).reshape(len(user_ids), len(item_ids)), user_ids, item_ids


def save_matrix_bin(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype=np.float64)
    with open(path, "wb") as fh:
        np.asarray(values.shape, dtype=_BIN_DIMS).tofile(fh)
        values.astype(_BIN_VALS, copy=False).tofile(fh)


def load_matrix_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        dims = np.fromfile(fh, dtype=_BIN_DIMS, count=2)
        if dims.size != 2:
            raise DataError(f"{path}: truncated header")
        n_rows, n_cols = (int(x) for x in dims)
        flat = np.fromfile(fh, dtype=_BIN_VALS)
    if flat.size != n_rows * n_cols:
        raise DataError(f"{path}: expected {n_rows * n_cols} values, got {flat.size}")
    return flat.astype(np.float64).reshape(n_rows, n_cols)
