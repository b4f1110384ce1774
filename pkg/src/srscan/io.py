"""CSV/JSON readers and writers.

File conventions: comma separated, no index column, floats written with 17
significant digits.  X.csv may carry a header row of column names; y.csv is
a single column.  Index columns in truth.csv and pip.csv are 1-based.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd

FLOAT_FMT = "%.17g"
PIP_COLUMNS = ["index", "name", "pip", "visits", "beta_mean", "beta_sd"]


class InputError(ValueError):
    pass


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _has_header(path: Path) -> bool:
    with open(path) as fh:
        first = fh.readline().strip()
    if not first:
        raise InputError(f"{path}: empty file")
    return not all(_is_number(t.strip().strip('"')) for t in first.split(","))


def _read_numeric(path) -> tuple[np.ndarray, list[str] | None]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    header = _has_header(path)
    try:
        df = pd.read_csv(path, header=0 if header else None, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    bad = [c for c in df.columns if not pd.api.types.is_numeric_dtype(df[c])]
    if bad:
        col = bad[0]
        vals = pd.to_numeric(df[col], errors="coerce")
        row = int(np.flatnonzero(vals.isna().to_numpy())[0])
        cpos = list(df.columns).index(col)
        raise InputError(
            f"{path}: non-numeric value {df[col].iloc[row]!r} at row {row + 1 + header}, column {cpos + 1}"
        )
    names = [str(c) for c in df.columns] if header else None
    return df.to_numpy(dtype=np.float64), names


def read_matrix_csv(path) -> tuple[np.ndarray, list[str] | None]:
    return _read_numeric(path)


def read_vector_csv(path) -> np.ndarray:
    arr, _ = _read_numeric(path)
    if arr.shape[1] != 1:
        raise InputError(f"{path}: expected a single column, found {arr.shape[1]}")
    return arr[:, 0]


def read_truth_csv(path, p: int | None = None) -> np.ndarray:
    """Return 0-based indices from a 1-based ``index`` column."""
    arr = read_vector_csv(path)
    if np.any(arr != np.round(arr)):
        raise InputError(f"{path}: truth indices must be integers")
    idx = arr.astype(np.int64) - 1
    if np.any(idx < 0) or (p is not None and np.any(idx >= p)):
        raise InputError(f"{path}: truth index out of range")
    return np.sort(idx)


def write_matrix_csv(path, X: np.ndarray, names=None) -> None:
    df = pd.DataFrame(np.asarray(X))
    if names is not None:
        df.columns = list(names)
    df.to_csv(path, index=False, header=names is not None, float_format=FLOAT_FMT, lineterminator="\n")


def write_vector_csv(path, y: np.ndarray, header: str | None = None) -> None:
    df = pd.DataFrame({header or "y": np.asarray(y)})
    df.to_csv(path, index=False, header=header is not None, float_format=FLOAT_FMT, lineterminator="\n")


def write_truth_csv(path, truth) -> None:
    pd.DataFrame({"index": np.asarray(truth, dtype=np.int64) + 1}).to_csv(
        path, index=False, lineterminator="\n")


def write_pip_csv(path, summary, names) -> None:
    df = pd.DataFrame({
        "index": np.arange(1, summary.pip.size + 1),
        "name": list(names),
        "pip": summary.pip,
        "visits": summary.visits,
        "beta_mean": summary.beta_mean,
        "beta_sd": summary.beta_sd,
    })
    df.to_csv(path, index=False, float_format=FLOAT_FMT, lineterminator="\n")


def read_pip_csv(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ("index", "pip") if c not in df.columns]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")
    return df


def write_trace_csv(path, trace: dict) -> None:
    pd.DataFrame(trace).to_csv(path, index=False, float_format=FLOAT_FMT, lineterminator="\n")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_sha256(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    X = np.ascontiguousarray(X, dtype=np.float64)
    h.update(np.asarray(X.shape, dtype=np.int64).tobytes())
    h.update(X.tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.float64).tobytes())
    return h.hexdigest()
