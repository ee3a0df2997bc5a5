"""Core data containers and delimited-text ingestion.

A Dataset bundles an n x p covariate matrix with an n x (J+1) matrix of
binary outcomes coded in {-1, +1}; column 0 is the target outcome and
columns 1..J are auxiliary outcomes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataValidationError",
    "DegenerateOutcomeError",
    "Dataset",
    "DecisionRule",
    "load_dataset",
]


class DataValidationError(ValueError):
    """Malformed input data (bad outcome codes, missing cells, shapes)."""


class DegenerateOutcomeError(ValueError):
    """An outcome column carries a single class where both are required."""


@dataclass(frozen=True)
class Dataset:
    covariates: np.ndarray
    outcomes: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.covariates, dtype=float, order="C", copy=True)
        Y = np.asarray(self.outcomes)
        if X.ndim != 2:
            raise DataValidationError("covariates must be a 2-d matrix")
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2 or Y.shape[0] != X.shape[0]:
            raise DataValidationError("outcomes must align with covariate rows")
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise DataValidationError("dataset must have at least one row, "
                                      "one covariate, and one outcome")
        if not np.all(np.isfinite(X)):
            raise DataValidationError("covariates must be finite")
        if not np.all(np.isin(Y, (-1, 1))):
            raise DataValidationError("outcome entries must all be -1 or +1")
        Y = np.array(Y, dtype=np.int8, order="C")
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != X.shape[1]:
                raise DataValidationError("feature_names length must equal p")
            object.__setattr__(self, "feature_names", names)
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "outcomes", Y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[1]

    @property
    def n_aux(self) -> int:
        return self.outcomes.shape[1] - 1

    def outcome(self, j: int) -> np.ndarray:
        return self.outcomes[:, j]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.covariates[rows], self.outcomes[rows], self.feature_names)


@dataclass(frozen=True)
class DecisionRule:
    """Linear classification rule x -> sign(x @ beta - c), sign(0) = +1."""

    beta: np.ndarray
    c: float

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float, copy=True)
        if beta.ndim != 1:
            raise ValueError("beta must be a 1-d vector")
        if not np.all(np.isfinite(beta)) or not np.isfinite(self.c):
            raise ValueError("rule coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "c", float(self.c))

    def index_values(self, X) -> np.ndarray:
        return np.asarray(X) @ self.beta

    def predict(self, X) -> np.ndarray:
        from .metrics import sign_plus

        return sign_plus(self.index_values(X) - self.c)


def _parse_outcome(cell: str, row: int, name: str, remap01: bool) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DataValidationError(
            f"row {row}, column {name!r}: outcome value {cell!r} is not numeric"
        ) from None
    if remap01:
        if value == 0.0:
            return -1
        if value == 1.0:
            return 1
        raise DataValidationError(
            f"row {row}, column {name!r}: outcome value {cell!r} not in {{0, 1}}"
        )
    if value == -1.0 or value == 1.0:
        return int(value)
    raise DataValidationError(
        f"row {row}, column {name!r}: outcome value {cell!r} not in {{-1, 1}}"
    )


def load_dataset(path, target_column: str, auxiliary_columns=(),
                 remap01: bool = False) -> Dataset:
    """Load a delimited text file with a header row into a Dataset.

    Outcome columns must contain only {-1, 1}, or {0, 1} with ``remap01``
    (0 maps to -1).  All remaining columns are covariates, in file order.
    Rows with missing or non-numeric cells are rejected with row-indexed
    messages (row 1 is the first data row after the header).
    """
    auxiliary_columns = list(auxiliary_columns)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        dupes = {h for h in header if header.count(h) > 1}
        if dupes:
            raise DataValidationError(
                f"{path}: duplicate column names {sorted(dupes)}"
            )
        for col in [target_column, *auxiliary_columns]:
            if col not in header:
                raise DataValidationError(f"{path}: column {col!r} not found")
        if target_column in auxiliary_columns:
            raise DataValidationError(
                f"{path}: target column {target_column!r} repeated in auxiliaries"
            )
        outcome_cols = [target_column, *auxiliary_columns]
        outcome_pos = [header.index(c) for c in outcome_cols]
        covariate_pos = [i for i in range(len(header)) if i not in outcome_pos]
        if not covariate_pos:
            raise DataValidationError(f"{path}: no covariate columns remain")

        X_rows, Y_rows = [], []
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataValidationError(
                    f"row {row_idx}: expected {len(header)} cells, got {len(row)}"
                )
            x_row = []
            for pos in covariate_pos:
                cell = row[pos].strip()
                if cell == "":
                    raise DataValidationError(
                        f"row {row_idx}, column {header[pos]!r}: missing value"
                    )
                try:
                    x_row.append(float(cell))
                except ValueError:
                    raise DataValidationError(
                        f"row {row_idx}, column {header[pos]!r}: "
                        f"non-numeric covariate value {cell!r}"
                    ) from None
            y_row = []
            for pos in outcome_pos:
                cell = row[pos].strip()
                if cell == "":
                    raise DataValidationError(
                        f"row {row_idx}, column {header[pos]!r}: missing value"
                    )
                y_row.append(_parse_outcome(cell, row_idx, header[pos], remap01))
            X_rows.append(x_row)
            Y_rows.append(y_row)

    if not X_rows:
        raise DataValidationError(f"{path}: no data rows")
    names = tuple(header[i] for i in covariate_pos)
    return Dataset(np.array(X_rows, dtype=float), np.array(Y_rows, dtype=np.int8),
                   feature_names=names)
