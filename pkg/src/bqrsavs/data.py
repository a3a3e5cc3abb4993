"""Response/design container and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Dataset:
    """Response vector y (length T) and design matrix X (T x K).

    Squared column norms are cached because the sparsification step uses them
    for every draw. ``has_intercept`` records whether column 0 is a constant
    column of ones added at load time.
    """

    y: np.ndarray
    X: np.ndarray
    has_intercept: bool = False
    col_norm_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )
        if self.y.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("need at least one observation and one covariate")
        if not np.all(np.isfinite(self.y)) or not np.all(np.isfinite(self.X)):
            raise ValueError("y and X must be finite")
        self.col_norm_sq = np.einsum("tk,tk->k", self.X, self.X)

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.X.shape[1]

    def subset(self, rows: slice) -> "Dataset":
        return Dataset(self.y[rows], self.X[rows], has_intercept=self.has_intercept)


def load_csv(path, add_intercept: bool = False) -> Dataset:
    """Read a headered CSV: first column is the response, the rest covariates.

    Blank or non-numeric cells are rejected; no imputation is attempted. With
    ``add_intercept`` a column of ones is prepended to the covariates.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        width = len(header)
        if width < 2:
            raise ValueError(f"{path}: need a response column and at least one covariate")
        for i, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(f"{path}: line {i} has {len(row)} cells, expected {width}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ValueError(
                    f"{path}: line {i} has a blank or non-numeric cell {bad!r}"
                ) from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    y, X = arr[:, 0], arr[:, 1:]
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
    return Dataset(y, X, has_intercept=add_intercept)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False
