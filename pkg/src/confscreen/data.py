"""Dataset loading, validation, and covariate group definitions."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "MissingColumnError",
    "ParseError",
    "ValidationError",
    "Dataset",
    "GroupSpec",
    "load_csv",
    "load_groups",
    "standardize",
    "write_csv",
]


class DataError(Exception):
    """Base class for all data-layer errors."""


class MissingColumnError(DataError):
    pass


class ParseError(DataError):
    pass


class ValidationError(DataError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Immutable analysis dataset: outcome, binary exposure, covariate matrix.

    For a bounded outcome kind the stored outcome lives in [0, 1]; the affine
    map back to the original scale is (scale, offset): original = scale * stored + offset.
    """

    outcome: np.ndarray
    exposure: np.ndarray
    covariates: np.ndarray
    column_names: tuple[str, ...]
    outcome_kind: str = "continuous"
    outcome_scale: float = 1.0
    outcome_offset: float = 0.0

    def __post_init__(self):
        outcome = np.asarray(self.outcome, dtype=float)
        exposure = np.asarray(self.exposure)
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim != 2:
            raise ValidationError("covariates must be a 2-D matrix")
        n = outcome.shape[0]
        if n < 2:
            raise ValidationError("need at least 2 observations")
        if covariates.shape[0] != n or exposure.shape[0] != n:
            raise ValidationError("outcome, exposure, and covariates must share length n")
        if covariates.shape[1] < 1:
            raise ValidationError("need at least one covariate column")
        if len(self.column_names) != covariates.shape[1]:
            raise ValidationError("column_names length must match covariate count")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValidationError("duplicate covariate column names")
        if self.outcome_kind not in ("continuous", "bounded"):
            raise ValidationError(f"unknown outcome_kind {self.outcome_kind!r}")
        if not np.all(np.isfinite(outcome)) or not np.all(np.isfinite(covariates)):
            raise ValidationError("non-finite values are not allowed")
        ev = np.unique(exposure)
        if not np.all(np.isin(ev, (0, 1))):
            raise ValidationError("exposure values must be exactly 0 or 1")
        if ev.size < 2:
            raise ValidationError(
                "exposure is constant: mean exposure in {0, 1} leaves one arm empty"
            )
        if self.outcome_kind == "bounded" and (outcome.min() < 0.0 or outcome.max() > 1.0):
            raise ValidationError("bounded outcome values must lie in [0, 1]")
        exposure = exposure.astype(np.int64)
        for name, value in (
            ("outcome", outcome),
            ("exposure", exposure),
            ("covariates", covariates),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def outcome_original(self) -> np.ndarray:
        """Outcome mapped back to its original (pre-rescaling) scale."""
        return self.outcome_scale * self.outcome + self.outcome_offset

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise MissingColumnError(f"unknown covariate column {name!r}") from None


@dataclass(frozen=True)
class GroupSpec:
    """Ordered, disjoint groups of covariate columns."""

    groups: tuple[tuple[str, tuple[str, ...]], ...]

    def validate(self, dataset: Dataset) -> None:
        seen_groups: set[str] = set()
        seen_cols: set[str] = set()
        for name, members in self.groups:
            if name in seen_groups:
                raise ValidationError(f"duplicate group name {name!r}")
            seen_groups.add(name)
            if len(members) == 0:
                raise ValidationError(f"group {name!r} is empty")
            for col in members:
                if col not in dataset.column_names:
                    raise MissingColumnError(
                        f"group {name!r} references unknown column {col!r}"
                    )
                if col in seen_cols:
                    raise ValidationError(
                        f"column {col!r} appears in more than one group"
                    )
                seen_cols.add(col)

    def member_indices(self, dataset: Dataset) -> list[tuple[str, tuple[int, ...]]]:
        return [
            (name, tuple(dataset.column_index(c) for c in members))
            for name, members in self.groups
        ]


def load_csv(path, outcome_col: str, exposure_col: str, outcome_kind: str = "continuous") -> Dataset:
    """Load a comma-separated file with a header row into a Dataset.

    All columns other than the named outcome and exposure become covariates
    in file order.  A bounded outcome whose raw range exceeds [0, 1] is
    affinely rescaled into [0, 1] and the affine map recorded on the Dataset.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = list(reader)
    for col in (outcome_col, exposure_col):
        if col not in header:
            raise MissingColumnError(f"{path}: no column named {col!r}")
    o_idx = header.index(outcome_col)
    e_idx = header.index(exposure_col)
    cov_idx = [i for i in range(len(header)) if i not in (o_idx, e_idx)]
    values = np.empty((len(rows), len(header)), dtype=float)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r + 2} has {len(row)} fields, expected {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {r + 2}, column {header[c]!r}"
                ) from None

    outcome = values[:, o_idx]
    exposure_raw = values[:, e_idx]
    if not np.all(np.isin(exposure_raw, (0.0, 1.0))):
        raise ValidationError(f"{path}: exposure column {exposure_col!r} must be 0/1")
    scale, offset = 1.0, 0.0
    if outcome_kind == "bounded" and outcome.size and (outcome.min() < 0.0 or outcome.max() > 1.0):
        offset = float(outcome.min())
        scale = float(outcome.max() - outcome.min())
        if scale == 0.0:
            raise ValidationError(f"{path}: bounded outcome is constant, cannot rescale")
        outcome = (outcome - offset) / scale
    return Dataset(
        outcome=outcome,
        exposure=exposure_raw.astype(np.int64),
        covariates=values[:, cov_idx],
        column_names=tuple(header[i] for i in cov_idx),
        outcome_kind=outcome_kind,
        outcome_scale=scale,
        outcome_offset=offset,
    )


def write_csv(dataset: Dataset, path, outcome_col: str = "outcome", exposure_col: str = "exposure") -> None:
    """Write a Dataset back to comma-separated text with full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([outcome_col, exposure_col, *dataset.column_names])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(dataset.outcome[i])), int(dataset.exposure[i])]
                + [repr(float(v)) for v in dataset.covariates[i]]
            )


def load_groups(path, dataset: Dataset) -> GroupSpec:
    """Load a JSON object mapping group names to column-name lists."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid group file: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: group file must be an object of name -> column list")
    groups = []
    for name, members in raw.items():
        if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
            raise ParseError(f"{path}: group {name!r} must map to a list of column names")
        groups.append((str(name), tuple(members)))
    spec = GroupSpec(groups=tuple(groups))
    spec.validate(dataset)
    return spec


def standardize(column) -> tuple[np.ndarray, float, float]:
    """Center and scale a column to sample mean 0, sample sd 1 (divisor n-1).

    A constant column is returned unchanged with sd recorded as 0; callers
    treat sd == 0 as the constant-column flag.
    """
    column = np.asarray(column, dtype=float)
    mean = float(column.mean())
    sd = float(column.std(ddof=1)) if column.size > 1 else 0.0
    if sd == 0.0:
        return column.copy(), mean, 0.0
    return (column - mean) / sd, mean, sd
