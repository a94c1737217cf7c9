"""Wide-format CSV ingestion and JSON persistence.

One subject per row.  A :class:`DatasetSchema` names the columns holding each
stage's features, action, reward, propensity (or a per-stage constant) and,
optionally, eligibility.  On an ineligible stage blank cells are allowed and
read as action +1, reward 0, features 0 and propensity 1.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Regimen, TrialData, as_trial_data

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


class CSVFormatError(ValueError):
    """Malformed input; the message names the data row (1-based, header excluded) and column."""


@dataclass(frozen=True)
class DatasetSchema:
    features: tuple  # per stage, tuple of column names (may be empty)
    actions: tuple
    rewards: tuple
    propensities: tuple  # per stage, a column name or a constant in (0, 1)
    eligible: tuple | None = None  # per stage, a column name or None (always eligible)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(tuple(f) for f in self.features))
        for name in ("actions", "rewards", "propensities"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        K = len(self.actions)
        if K < 1:
            raise ValueError("schema needs at least one stage")
        if not (len(self.features) == len(self.rewards) == len(self.propensities) == K):
            raise ValueError("features, actions, rewards and propensities need one entry per stage")
        if self.eligible is not None:
            object.__setattr__(self, "eligible", tuple(self.eligible))
            if len(self.eligible) != K:
                raise ValueError("eligible needs one entry per stage")
        for k, p in enumerate(self.propensities, start=1):
            if not isinstance(p, str) and not 0.0 < float(p) < 1.0:
                raise ValueError(f"stage {k}: constant propensity must lie in (0, 1), got {p!r}")

    @property
    def n_stages(self) -> int:
        return len(self.actions)

    @property
    def feature_dims(self) -> tuple[int, ...]:
        return tuple(len(f) for f in self.features)

    def columns(self) -> list[str]:
        """Every column the schema references, in stage order."""
        cols = []
        for t in range(self.n_stages):
            cols.extend(self.features[t])
            cols.append(self.actions[t])
            cols.append(self.rewards[t])
            if isinstance(self.propensities[t], str):
                cols.append(self.propensities[t])
            if self.eligible is not None and self.eligible[t] is not None:
                cols.append(self.eligible[t])
        return cols

    @classmethod
    def default(cls, feature_dims, eligibility: bool = True) -> "DatasetSchema":
        """Columns ``x{k}_{j}``, ``a{k}``, ``r{k}``, ``p{k}`` and ``e{k}`` for 1-based ``k`` and ``j``."""
        K = len(feature_dims)
        return cls(tuple(tuple(f"x{k}_{j}" for j in range(1, d + 1)) for k, d in enumerate(feature_dims, start=1)),
                   tuple(f"a{k}" for k in range(1, K + 1)),
                   tuple(f"r{k}" for k in range(1, K + 1)),
                   tuple(f"p{k}" for k in range(1, K + 1)),
                   tuple(f"e{k}" for k in range(1, K + 1)) if eligibility else None)

    def to_dict(self) -> dict:
        return {"format": "amol.schema", "version": 1,
                "features": [list(f) for f in self.features], "actions": list(self.actions),
                "rewards": list(self.rewards), "propensities": list(self.propensities),
                "eligible": None if self.eligible is None else list(self.eligible)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        if d.get("format") != "amol.schema" or d.get("version") != 1:
            raise ValueError("not a version-1 dataset schema")
        return cls(d["features"], d["actions"], d["rewards"], d["propensities"], d.get("eligible"))


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise CSVFormatError(f"row {row}, column {col!r}: cannot parse {cell!r} as a number") from None
    if not np.isfinite(v):
        raise CSVFormatError(f"row {row}, column {col!r}: value is not finite")
    return v


def _parse_bool(cell: str, row: int, col: str) -> bool:
    s = cell.strip().lower()
    if s in _TRUE:
        return True
    if s in _FALSE:
        return False
    raise CSVFormatError(f"row {row}, column {col!r}: cannot parse {cell!r} as eligibility")


def load_csv(path, schema: DatasetSchema) -> TrialData:
    """Read a wide CSV into :class:`TrialData` (use ``.to_trajectories()`` for records)."""
    K = schema.n_stages
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in schema.columns() if c not in header]
        if missing:
            raise CSVFormatError(f"header lacks columns {missing}")
        feats = [[] for _ in range(K)]
        A, R, P, E = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            if None in row or any(v is None for v in row.values()):
                raise CSVFormatError(f"row {row_no}: wrong number of fields")
            a_row, r_row, p_row, e_row = [], [], [], []
            for t in range(K):
                k = t + 1
                ecol = schema.eligible[t] if schema.eligible is not None else None
                elig = True if ecol is None else _parse_bool(row[ecol], row_no, ecol)

                def cell(col, default):
                    v = row[col].strip()
                    if v == "":
                        if elig:
                            raise CSVFormatError(f"row {row_no}, column {col!r}: missing value at eligible stage {k}")
                        return default
                    return _parse_float(v, row_no, col)

                feats[t].append([cell(c, 0.0) for c in schema.features[t]])
                a = cell(schema.actions[t], 1.0)
                if a not in (-1.0, 1.0):
                    raise CSVFormatError(f"row {row_no}, column {schema.actions[t]!r}: action must be -1 or +1, got {row[schema.actions[t]]!r}")
                r = cell(schema.rewards[t], 0.0)
                pspec = schema.propensities[t]
                if not elig:
                    p = 1.0
                    if isinstance(pspec, str) and cell(pspec, 1.0) != 1.0:
                        raise CSVFormatError(f"row {row_no}, column {pspec!r}: ineligible stage must have propensity 1 or blank")
                elif isinstance(pspec, str):
                    p = cell(pspec, 1.0)
                    if not 0.0 < p < 1.0:
                        raise CSVFormatError(f"row {row_no}, column {pspec!r}: propensity must lie in (0, 1), got {row[pspec]!r}")
                else:
                    p = float(pspec)
                a_row.append(int(a))
                r_row.append(r)
                p_row.append(p)
                e_row.append(elig)
            A.append(a_row)
            R.append(r_row)
            P.append(p_row)
            E.append(e_row)
    if not A:
        raise CSVFormatError("no data rows")
    n = len(A)
    features = tuple(np.array(feats[t], dtype=float).reshape(n, len(schema.features[t])) for t in range(K))
    return TrialData(features, A, R, P, E).validate()


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, data, schema: DatasetSchema | None = None) -> DatasetSchema:
    """Write ``data`` as a wide CSV with 17 significant digits; returns the schema used.

    A schema with constant propensities can only describe data whose eligible
    propensities equal those constants.
    """
    data = as_trial_data(data)
    if schema is None:
        schema = DatasetSchema.default(data.feature_dims, eligibility=not data.eligible.all())
    if schema.feature_dims != data.feature_dims:
        raise ValueError(f"schema feature dims {schema.feature_dims} do not match data {data.feature_dims}")
    cols = schema.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(data.n):
            vals = {}
            for t in range(data.n_stages):
                for j, c in enumerate(schema.features[t]):
                    vals[c] = _fmt(data.features[t][i, j])
                vals[schema.actions[t]] = str(int(data.actions[i, t]))
                vals[schema.rewards[t]] = _fmt(data.rewards[i, t])
                pspec = schema.propensities[t]
                if isinstance(pspec, str):
                    vals[pspec] = _fmt(data.propensities[i, t])
                elif data.eligible[i, t] and data.propensities[i, t] != float(pspec):
                    raise ValueError(f"subject {i}, stage {t + 1}: propensity differs from schema constant")
                if schema.eligible is not None and schema.eligible[t] is not None:
                    vals[schema.eligible[t]] = "1" if data.eligible[i, t] else "0"
                elif not data.eligible[i, t]:
                    raise ValueError("schema has no eligibility column for an ineligible stage")
            w.writerow([vals[c] for c in cols])
    return schema


def save_json(obj, path):
    """Write ``obj`` (anything with ``to_dict`` or a plain dict) as sorted, indented JSON."""
    d = obj.to_dict() if hasattr(obj, "to_dict") else obj
    text = json.dumps(d, indent=2, sort_keys=True, allow_nan=True) + "\n"
    Path(path).write_text(text)


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def load_schema(path) -> DatasetSchema:
    return DatasetSchema.from_dict(load_json(path))


def load_regimen(path) -> Regimen:
    """Read a regimen from a regimen document or from a fit report."""
    d = load_json(path)
    if d.get("format") == "amol.fit_report":
        d = d["regimen"]
    return Regimen.from_dict(d)
