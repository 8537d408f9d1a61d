"""
File formats of the command-line tools.

Matrices are CSV files with a header row of column names, decimal cells
written with 17 significant digits and the literal ``NA`` for a missing
entry. Every command also writes one ``manifest.json`` describing the run.
"""
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .exceptions import DataError
from .links_losses import CoupledData
from .simulation import SimGroundTruth, SimParams

logger = logging.getLogger(__name__)

NA = "NA"
FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class MatrixFile:
    """A matrix with named columns; NaN marks a missing entry."""

    values: np.ndarray
    columns: List[str]

    @classmethod
    def read(cls, path, binary=False):
        path = Path(path)
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except FileNotFoundError as err:
            raise DataError("%s: no such file" % path) from err
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as err:
            raise DataError("%s: %s" % (path, err)) from err
        if frame.shape[1] == 0 or frame.shape[0] == 0:
            raise DataError("%s: empty matrix" % path)
        cells = frame.apply(lambda col: col.str.strip())
        missing = (cells == NA).to_numpy()
        try:
            # float() parses every decimal back to the exact written double
            values = np.array(cells.mask(cells == NA, "nan").to_numpy(), dtype=float)
        except ValueError as err:
            raise DataError("%s: non-numeric cell (%s)" % (path, err)) from err
        if np.any(np.isnan(values) & ~missing):
            raise DataError("%s: NaN cell; write missing entries as %s" % (path, NA))
        if binary:
            observed = values[~missing]
            if np.any((observed != 0.0) & (observed != 1.0)):
                raise DataError("%s: binary matrix holds values other than 0, 1, NA" % path)
        return cls(values=values, columns=[str(c) for c in frame.columns])

    def write(self, path):
        frame = pd.DataFrame(self.values, columns=self.columns)
        frame.to_csv(path, index=False, na_rep=NA, float_format=FLOAT_FORMAT)


def read_matrix_csv(path, binary=False):
    """Values (NaN for NA) of a matrix CSV."""
    return MatrixFile.read(path, binary).values


def write_matrix_csv(path, values, columns=None, prefix="V"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if columns is None:
        columns = ["%s%d" % (prefix, j + 1) for j in range(values.shape[1])]
    MatrixFile(values=values, columns=list(columns)).write(path)


def load_coupled(x1_path, x2_path):
    """Read the binary and quantitative blocks into CoupledData."""
    m1 = MatrixFile.read(x1_path, binary=True)
    m2 = MatrixFile.read(x2_path)
    if m1.values.shape[0] != m2.values.shape[0]:
        raise DataError("%s has %d rows but %s has %d"
                        % (x1_path, m1.values.shape[0], x2_path, m2.values.shape[0]))
    return CoupledData.from_arrays(m1.values, m2.values), m1.columns, m2.columns


def file_digest(path):
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def _jsonable(value):
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_jsonable(payload), handle, indent=2, sort_keys=False)
        handle.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as err:
        raise DataError("%s: no such file" % path) from err
    except json.JSONDecodeError as err:
        raise DataError("%s: invalid JSON (%s)" % (path, err)) from err


def append_rows_csv(path, rows):
    """Append dict rows to a CSV, writing the header when the file is new."""
    if not rows:
        return
    path = Path(path)
    frame = pd.DataFrame(rows)
    frame.to_csv(path, mode="a", header=not path.exists(), index=False,
                 na_rep=NA, float_format=FLOAT_FORMAT)


def write_table(frame, path, excel=False):
    """Tidy result table as CSV, plus an .xlsx workbook when ``excel``."""
    path = Path(path)
    frame.to_csv(path, index=False, na_rep=NA, float_format=FLOAT_FORMAT)
    if excel:
        frame.to_excel(path.with_suffix(".xlsx"), index=False, engine="openpyxl")
    logger.info("wrote %s (%d rows)", path, len(frame))


class RunManifest(BaseModel):
    command: str
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    version: str
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)
    started: str
    elapsed_seconds: float = Field(ge=0.0)


def write_manifest(out_dir, command, params, seed, inputs, started_at, outputs=()):
    """Write manifest.json for a run started at ``started_at`` (time.time())."""
    from . import __version__

    out_dir = Path(out_dir)
    manifest = RunManifest(
        command=command,
        params=_jsonable(params),
        seed=seed,
        version=__version__,
        inputs={str(p): file_digest(p) for p in inputs},
        outputs=sorted(str(p) for p in outputs),
        started=time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started_at)),
        elapsed_seconds=max(0.0, time.time() - started_at),
    )
    write_json(out_dir / MANIFEST_NAME, manifest)
    return manifest


def write_fit(fit, out_dir, columns1=None, columns2=None):
    """fit.json with the summary and A.csv, B1.csv, B2.csv, Z.csv."""
    out_dir = Path(out_dir)
    columns = None
    if columns1 is not None and columns2 is not None:
        columns = list(columns1) + list(columns2)
    write_json(out_dir / "fit.json", fit.to_dict())
    write_matrix_csv(out_dir / "A.csv", fit.A, prefix="PC")
    write_matrix_csv(out_dir / "B1.csv", fit.B1, prefix="PC")
    write_matrix_csv(out_dir / "B2.csv", fit.B2, prefix="PC")
    write_matrix_csv(out_dir / "Z.csv", fit.Z, columns=columns)
    return [out_dir / name for name in ("fit.json", "A.csv", "B1.csv", "B2.csv", "Z.csv")]


_TRUTH_MATRICES = ("Theta1", "Theta2", "Z", "U", "V1", "V2", "E1", "E2")


def write_truth(truth, out_dir):
    """X1.csv, X2.csv, truth.json and the ground-truth matrices."""
    out_dir = Path(out_dir)
    J1, J2 = truth.J1, truth.X2.shape[1]
    columns1 = ["bin%d" % (j + 1) for j in truth.binary_columns]
    columns2 = ["quant%d" % (j + 1) for j in range(J2)]
    write_matrix_csv(out_dir / "X1.csv", truth.X1, columns1)
    write_matrix_csv(out_dir / "X2.csv", truth.X2, columns2)
    payload = truth.manifest()
    payload["params"] = truth.params.model_dump()
    payload["mu"] = truth.mu.tolist()
    payload["D1"] = truth.D1.tolist()
    payload["D2"] = truth.D2.tolist()
    write_json(out_dir / "truth.json", payload)
    written = [out_dir / "X1.csv", out_dir / "X2.csv", out_dir / "truth.json"]
    for name in _TRUTH_MATRICES:
        write_matrix_csv(out_dir / ("%s.csv" % name), getattr(truth, name))
        written.append(out_dir / ("%s.csv" % name))
    logger.info("wrote simulated %d x (%d + %d) data to %s",
                truth.X1.shape[0], J1, J2, out_dir)
    return written


def load_truth(directory):
    """Rebuild the SimGroundTruth written by write_truth."""
    directory = Path(directory)
    payload = read_json(directory / "truth.json")
    try:
        matrices = {name: read_matrix_csv(directory / ("%s.csv" % name))
                    for name in _TRUTH_MATRICES}
        X1 = read_matrix_csv(directory / "X1.csv", binary=True)
        X2 = read_matrix_csv(directory / "X2.csv")
        return SimGroundTruth(
            X1=X1, X2=X2, mu=np.asarray(payload["mu"], dtype=float),
            D=np.asarray(payload["D"], dtype=float),
            D1=np.asarray(payload["D1"], dtype=float),
            D2=np.asarray(payload["D2"], dtype=float),
            c1=float(payload["c1"]), c2=float(payload["c2"]),
            snr1=float(payload["realized_snr1"]), snr2=float(payload["realized_snr2"]),
            sigma2=float(payload["sigma2"]), params=SimParams(**payload["params"]),
            binary_columns=np.asarray(payload["binary_columns"], dtype=int),
            **matrices)
    except KeyError as err:
        raise DataError("%s: truth.json lacks %s" % (directory, err)) from err
