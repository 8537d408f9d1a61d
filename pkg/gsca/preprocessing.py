import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataError, InvalidArgumentError
from .matrix_io import MatrixFile
from .simulation import drop_uninformative_binary_columns

logger = logging.getLogger(__name__)


def prepare_quantitative(frame, n_top=None, scale=True):
    """
    Select and standardize the quantitative block.

    Keeps the ``n_top`` columns with the largest variance (all columns when
    None), centers each column and, with ``scale``, divides it by its
    standard deviation. Missing entries (NaN) are ignored by every statistic.
    """
    frame = pd.DataFrame(frame).astype(float)
    variances = frame.var(axis=0, skipna=True, ddof=1)
    if n_top is not None:
        if n_top < 1:
            raise InvalidArgumentError("n_top must be positive, got %d" % n_top)
        keep = set(variances.sort_values(ascending=False, kind="mergesort").index[:n_top])
        frame = frame.loc[:, [c for c in frame.columns if c in keep]]
        variances = variances[frame.columns]
    constant = variances.index[~(variances > 0)]
    if len(constant):
        logger.info("dropped %d quantitative columns without variation", len(constant))
        frame = frame.drop(columns=constant)
    if frame.shape[1] == 0:
        raise DataError("no quantitative column with variation left")
    frame = frame - frame.mean(axis=0, skipna=True)
    if scale:
        frame = frame / frame.std(axis=0, skipna=True, ddof=1)
    return frame


def read_and_clean_blocks(x1_path, x2_path, out_dir, n_top=None, scale=True):
    """
    Read, clean and save a coupled binary / quantitative data set.

    Cleaning steps:
    - Rows entirely missing in either block are removed from both blocks.
    - Binary columns without variation are removed.
    - The quantitative block goes through prepare_quantitative.

    Output: X1.csv and X2.csv in ``out_dir``. Returns their paths.
    """
    m1 = MatrixFile.read(x1_path, binary=True)
    m2 = MatrixFile.read(x2_path)
    if m1.values.shape[0] != m2.values.shape[0]:
        raise DataError("%s has %d rows but %s has %d"
                        % (x1_path, m1.values.shape[0], x2_path, m2.values.shape[0]))
    print(f"Initial number of rows: {m1.values.shape[0]}")

    # Remove rows without any observation in one of the blocks
    rows = ~np.all(np.isnan(m1.values), axis=1) & ~np.all(np.isnan(m2.values), axis=1)
    X1, X2 = m1.values[rows], m2.values[rows]
    print(f"Number of rows after removing empty rows: {X1.shape[0]}")
    if X1.shape[0] < 2:
        raise DataError("fewer than 2 rows left after cleaning")

    Q1 = ~np.isnan(X1)
    X1, Q1, kept = drop_uninformative_binary_columns(np.where(Q1, X1, 0.0), Q1)
    X1 = np.where(Q1, X1, np.nan)
    if X1.shape[1] == 0:
        raise DataError("no binary column with variation left")
    columns1 = [m1.columns[j] for j in kept]
    print(f"Number of binary columns kept: {len(columns1)} of {len(m1.columns)}")

    frame2 = prepare_quantitative(pd.DataFrame(X2, columns=m2.columns), n_top, scale)
    print(f"Number of quantitative columns kept: {frame2.shape[1]} of {len(m2.columns)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = out_dir / "X1.csv", out_dir / "X2.csv"
    MatrixFile(values=X1, columns=columns1).write(paths[0])
    MatrixFile(values=frame2.to_numpy(), columns=list(frame2.columns)).write(paths[1])
    print(f"New files created successfully: {paths[0]}, {paths[1]}")
    return paths
