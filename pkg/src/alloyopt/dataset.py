"""Alloy dataset ingestion, duplicate collapsing, splits and neighbor queries.

CSV schema: one column per element symbol (percent), a ``ms_celsius``
target column, optional precomputed feature columns ``y1..y7`` (validated
against recomputation when present) and an optional ``group_size`` column
written by :func:`dedup_median`.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DatasetError,
    EmptyIndexError,
    RowValidationError,
    UnknownColumnError,
)
from .features import (
    COMPOSITION_TOTAL,
    N_FEATURES,
    Composition,
    FeatureVector,
    compute_features,
)
from .registry import Registry

INGEST_SUM_TOLERANCE = 1e-6
FEATURE_MATCH_RTOL = 1e-9
_GROUP_SIG_DIGITS = 12


@dataclass(frozen=True)
class AlloyRecord:
    composition: Composition
    features: FeatureVector
    ms_temperature: float  # deg C
    group_size: int = 1


@dataclass(frozen=True)
class Dataset:
    records: tuple[AlloyRecord, ...]
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.records:
            raise DatasetError("dataset must contain at least one record")

    def __len__(self) -> int:
        return len(self.records)

    def feature_matrix(self) -> np.ndarray:
        return np.array([r.features.as_array() for r in self.records])

    def temperatures(self) -> np.ndarray:
        return np.array([r.ms_temperature for r in self.records])

    def compositions(self) -> np.ndarray:
        return np.array([r.composition.percentages for r in self.records])


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


@dataclass(frozen=True)
class NeighborIndex:
    """Feature rows of a reference set, queried for nearest distances.

    With ``std`` set, distances are computed in standardized feature units;
    the default is the raw units the proximity threshold was tuned in.
    """

    features: np.ndarray  # (k, 7)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise EmptyIndexError("neighbor index needs at least one row")

    @property
    def scaled(self) -> np.ndarray:
        if self.std is None:
            return self.features
        return (self.features - self.mean) / self.std


def build_neighbor_index(d: Dataset, standardize: bool = False) -> NeighborIndex:
    feats = d.feature_matrix()
    if not standardize:
        return NeighborIndex(features=feats)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0
    return NeighborIndex(features=feats, mean=mean, std=std)


def min_feature_distance(idx: NeighborIndex, y) -> tuple[float, int]:
    """Exact minimum Euclidean distance from ``y`` to the indexed rows.

    Returns ``(distance, argmin_row)``; ties resolve to the lowest row id.
    The scan is a dense linear pass, which is exact and fast enough for
    datasets of a few thousand rows.
    """
    q = y.as_array() if isinstance(y, FeatureVector) else np.asarray(y, dtype=float)
    rows = idx.features
    if idx.std is not None:
        q = (q - idx.mean) / idx.std
        rows = idx.scaled
    d2 = np.sum((rows - q) ** 2, axis=1)
    k = int(np.argmin(d2))
    return float(np.sqrt(d2[k])), k


def _round_sig(value: float, digits: int = _GROUP_SIG_DIGITS) -> float:
    if value == 0.0 or not np.isfinite(value):
        return 0.0 if value == 0.0 else value
    return float(np.format_float_scientific(value, precision=digits - 1, unique=False))


def _group_key(features: FeatureVector) -> tuple[float, ...]:
    return tuple(_round_sig(v) for v in features.as_array())


def _record_digest(r: AlloyRecord) -> bytes:
    key = _group_key(r.features) + (_round_sig(r.ms_temperature),)
    payload = ",".join(repr(v) for v in key).encode()
    return hashlib.sha256(payload).digest()


def ingest_csv(path, reg: Registry) -> Dataset:
    """Read and validate alloy records from ``path``.

    Composition columns are matched to registry symbols (absent elements
    are zero). Rows whose percentages sum within ``1e-6`` of 100 are
    rescaled exactly onto the constraint; rows outside that tolerance, or
    with negative percentages, are rejected with their row number.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2:
        raise DatasetError(f"{path}: no data rows")
    header = [c.strip() for c in rows[0]]
    feature_cols = {f"y{i + 1}": i for i in range(N_FEATURES)}
    special = {"ms_celsius", "group_size", *feature_cols}
    symbols = set(reg.symbols)
    for col in header:
        if col not in special and col not in symbols:
            raise UnknownColumnError(f"{path}: unknown column {col!r}")
    if "ms_celsius" not in header:
        raise DatasetError(f"{path}: missing required column 'ms_celsius'")

    col_idx = {c: header.index(c) for c in header}
    element_cols = [(reg.index_of(c), col_idx[c]) for c in header if c in symbols]

    records = []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RowValidationError(rownum, f"expected {len(header)} fields, got {len(row)}")
        try:
            x = np.zeros(reg.n)
            for ei, ci in element_cols:
                x[ei] = float(row[ci])
            temp = float(row[col_idx["ms_celsius"]])
        except ValueError as exc:
            raise RowValidationError(rownum, f"unparseable number ({exc})") from None
        if np.any(x < 0.0):
            bad = reg.symbols[int(np.argmin(x))]
            raise RowValidationError(rownum, f"negative percentage for {bad}")
        total = x.sum()
        if abs(total - COMPOSITION_TOTAL) > INGEST_SUM_TOLERANCE:
            raise RowValidationError(rownum, f"percentages sum to {total!r}")
        if total != COMPOSITION_TOTAL:
            x *= COMPOSITION_TOTAL / total
        comp = Composition(x)
        feats = compute_features(comp, reg)
        for name, j in feature_cols.items():
            if name in col_idx:
                given = float(row[col_idx[name]])
                computed = feats.as_array()[j]
                tol = FEATURE_MATCH_RTOL * max(1.0, abs(computed))
                if abs(given - computed) > tol:
                    raise RowValidationError(
                        rownum, f"stored {name}={given!r} disagrees with computed {computed!r}"
                    )
        group_size = int(row[col_idx["group_size"]]) if "group_size" in col_idx else 1
        records.append(
            AlloyRecord(composition=comp, features=feats, ms_temperature=temp,
                        group_size=group_size)
        )
    return Dataset(records=tuple(records), provenance=(str(path),))


def write_csv(d: Dataset, reg: Registry, path, include_features: bool = False) -> None:
    """Serialize to the ingest schema; floats via ``repr`` for stable bytes."""
    header = list(reg.symbols) + ["ms_celsius", "group_size"]
    if include_features:
        header += [f"y{i + 1}" for i in range(N_FEATURES)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in d.records:
            row = [repr(float(v)) for v in r.composition.percentages]
            row += [repr(float(r.ms_temperature)), str(r.group_size)]
            if include_features:
                row += [repr(float(v)) for v in r.features.as_array()]
            w.writerow(row)


def dedup_median(d: Dataset) -> Dataset:
    """Collapse records with equal feature vectors to their median temperature.

    Equality is feature rounding to 12 significant digits, which absorbs
    last-bit noise without merging physically distinct alloys. Even-sized
    groups take the mean of the two middle temperatures. The first record
    of each group (in input order) supplies the composition.
    """
    groups: dict[tuple[float, ...], list[AlloyRecord]] = {}
    order: list[tuple[float, ...]] = []
    for r in d.records:
        key = _group_key(r.features)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        members = groups[key]
        temp = float(np.median([m.ms_temperature for m in members]))
        first = members[0]
        size = sum(m.group_size for m in members)
        out.append(
            AlloyRecord(composition=first.composition, features=first.features,
                        ms_temperature=temp, group_size=size)
        )
    return Dataset(records=tuple(out), provenance=d.provenance + ("dedup_median",))


def split(d: Dataset, cfg: SplitConfig) -> tuple[Dataset, Dataset]:
    """Deterministic, record-order-invariant train/test partition.

    Records are first ordered by a stable content hash, then shuffled with
    the seeded generator, so the same data yields the same split no matter
    how the input rows were arranged. Train size is ``round(N * fraction)``
    (half away from zero).
    """
    n = len(d)
    digests = [_record_digest(r) for r in d.records]
    order = sorted(range(n), key=lambda i: (digests[i], i))
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    shuffled = [d.records[order[j]] for j in perm]
    n_train = int(np.floor(n * cfg.train_fraction + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    train = Dataset(records=tuple(shuffled[:n_train]), provenance=d.provenance + ("train",))
    test = Dataset(records=tuple(shuffled[n_train:]), provenance=d.provenance + ("test",))
    return train, test
