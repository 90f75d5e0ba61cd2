"""Datasets, loss functions, and (weighted) empirical risk evaluation.

This module is the shared substrate of the package: a small array-backed
dataset type, nonnegative per-record weight vectors, a handful of loss
kinds, and the plain / weighted empirical risk functionals

    risk(theta)          = (1/n) * sum_i loss(theta, z_i)
    weighted(theta, w)   = (1/n) * sum_i w_i * loss(theta, z_i)

The weighted functional always divides by n; weight estimators elsewhere
fold any count ratios into the weights themselves, so one evaluation path
serves every bias setting.

Label convention: binary problems store the positive class as label 1 and
the negative class as label 0.  In positive-unlabeled data, label 1 marks
a labeled positive and label 0 an unlabeled record.

CSV schema (external interface): a header row with feature columns
``x0..x{d-1}`` (floats) and optional columns ``y`` (int label), ``s``
(int stratum), ``t`` (nonnegative float time), ``e`` (0/1 event flag).
A missing optional column means the field is absent for every record.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "WermError",
    "ValidationError",
    "SchemaError",
    "DomainError",
    "DegenerateClassError",
    "EmptyStratumError",
    "PositivityViolationError",
    "NumericError",
    "Record",
    "Dataset",
    "WeightVector",
    "LossSpec",
    "per_record_losses",
    "empirical_risk",
    "weighted_empirical_risk",
    "classification_metrics",
    "softmax",
    "log_softmax",
    "read_csv",
    "write_csv",
]


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class WermError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WermError):
    """An argument value is invalid or an invariant is broken."""


class SchemaError(ValidationError):
    """Structurally inconsistent data: shapes, columns, or field presence."""


class DomainError(ValidationError):
    """A numeric argument lies outside its mathematical domain."""


class DegenerateClassError(ValidationError):
    """A label group that must be populated is empty.

    The offending group is available as ``.group`` (0/1 class id for
    binary settings).
    """

    def __init__(self, group: int, message: str | None = None):
        self.group = group
        super().__init__(message or f"label group {group} is empty")


class EmptyStratumError(ValidationError):
    """A stratum with positive target probability has no records."""

    def __init__(self, stratum: int, message: str | None = None):
        self.stratum = stratum
        super().__init__(message or f"stratum {stratum} is empty")


class PositivityViolationError(ValidationError):
    """A weight denominator hit zero for a record that needs a weight."""

    def __init__(self, record_index: int, message: str | None = None):
        self.record_index = record_index
        super().__init__(
            message
            or f"zero survival mass at record {record_index}; weight undefined"
        )


class NumericError(WermError):
    """A computation produced non-finite values."""


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Record:
    """One observation: features plus optional label / stratum / survival fields."""

    features: np.ndarray
    label: int | None = None
    stratum: int | None = None
    time: float | None = None
    event: bool | None = None


@dataclass
class Dataset:
    """A homogeneous collection of records, stored column-wise.

    Parameters
    ----------
    features : (n, d) float array
    labels : (n,) int array, optional
        Class ids in ``{0..J-1}``.
    strata : (n,) int array, optional
        Stratum ids in ``{0..K-1}``.
    times : (n,) float array, optional
        Nonnegative durations.
    events : (n,) bool array, optional
        True when the duration is an observed event, False when censored.
    n_classes, n_strata : int, optional
        J and K; inferred from the data when omitted (J floored at 2 so
        that a degenerate single-class sample still counts as binary).
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    strata: np.ndarray | None = None
    times: np.ndarray | None = None
    events: np.ndarray | None = None
    n_classes: int | None = None
    n_strata: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise SchemaError(
                "features must be a (n, d) matrix; reshape scalar features to (n, 1)"
            )
        n = self.features.shape[0]
        if n == 0:
            raise SchemaError("dataset must be nonempty")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features contain non-finite values")

        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            _check_column(self.labels, n, "labels")
            if self.labels.min() < 0:
                raise ValidationError("labels must be nonnegative class ids")
            if self.n_classes is None:
                self.n_classes = max(2, int(self.labels.max()) + 1)
            elif self.labels.max() >= self.n_classes:
                raise ValidationError("label id exceeds n_classes")
        if self.strata is not None:
            self.strata = np.asarray(self.strata, dtype=int)
            _check_column(self.strata, n, "strata")
            if self.strata.min() < 0:
                raise ValidationError("strata must be nonnegative ids")
            if self.n_strata is None:
                self.n_strata = int(self.strata.max()) + 1
            elif self.strata.max() >= self.n_strata:
                raise ValidationError("stratum id exceeds n_strata")
        if (self.times is None) != (self.events is None):
            raise SchemaError("times and events must be given together")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)
            _check_column(self.times, n, "times")
            if not np.all(np.isfinite(self.times)) or self.times.min() < 0:
                raise ValidationError("times must be finite and >= 0")
            self.events = np.asarray(self.events, dtype=bool)
            _check_column(self.events, n, "events")

    # -- basic shape accessors ------------------------------------------------

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    # -- counts ---------------------------------------------------------------

    def class_counts(self) -> np.ndarray:
        if self.labels is None:
            raise SchemaError("dataset has no labels")
        return np.bincount(self.labels, minlength=self.n_classes)

    def stratum_counts(self) -> np.ndarray:
        if self.strata is None:
            raise SchemaError("dataset has no strata")
        return np.bincount(self.strata, minlength=self.n_strata)

    @property
    def n_pos(self) -> int:
        """Number of records with label 1 (binary convention)."""
        if self.labels is None:
            raise SchemaError("dataset has no labels")
        return int(np.sum(self.labels == 1))

    # -- record views ----------------------------------------------------------

    def record(self, i: int) -> Record:
        return Record(
            features=self.features[i],
            label=None if self.labels is None else int(self.labels[i]),
            stratum=None if self.strata is None else int(self.strata[i]),
            time=None if self.times is None else float(self.times[i]),
            event=None if self.events is None else bool(self.events[i]),
        )

    def records(self) -> Iterator[Record]:
        return (self.record(i) for i in range(self.n))

    def take(self, indices: Sequence[int]) -> "Dataset":
        """Row subset (in the given order), keeping J and K."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[idx],
            labels=None if self.labels is None else self.labels[idx],
            strata=None if self.strata is None else self.strata[idx],
            times=None if self.times is None else self.times[idx],
            events=None if self.events is None else self.events[idx],
            n_classes=self.n_classes,
            n_strata=self.n_strata,
        )

    @staticmethod
    def from_records(records: Sequence[Record], **kwargs) -> "Dataset":
        feats = np.vstack([np.atleast_1d(r.features) for r in records])
        labels = [r.label for r in records]
        strata = [r.stratum for r in records]
        times = [r.time for r in records]
        events = [r.event for r in records]

        def col(vals):
            if all(v is None for v in vals):
                return None
            if any(v is None for v in vals):
                raise SchemaError("records are not schema-consistent")
            return np.asarray(vals)

        return Dataset(
            features=feats,
            labels=col(labels),
            strata=col(strata),
            times=col(times),
            events=col(events),
            **kwargs,
        )


@dataclass(frozen=True)
class WeightVector:
    """Per-record nonnegative importance weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValidationError("weights must be a flat vector")
        if w.size == 0:
            raise ValidationError("weight vector must be nonempty")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if w.min() < 0:
            raise ValidationError("weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def mean(self) -> float:
        return float(self.weights.mean())

    @staticmethod
    def ones(n: int) -> "WeightVector":
        return WeightVector(np.ones(n))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["w"])
            for w in self.weights:
                writer.writerow([repr(float(w))])

    @staticmethod
    def from_csv(path) -> "WeightVector":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["w"]:
            raise SchemaError("weight CSV must have the single header 'w'")
        try:
            return WeightVector(np.array([float(r[0]) for r in rows[1:]]))
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"malformed weight CSV: {exc}") from exc


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

LOSS_KINDS = ("zero-one-classification", "softmax-cross-entropy", "threshold-sign")


@dataclass(frozen=True)
class LossSpec:
    """Loss selector.

    kind
        ``zero-one-classification``: params is a callable mapping a (n, d)
        feature matrix to (n,) predicted class ids; loss is the 0/1 error.
        ``softmax-cross-entropy``: params maps features to (n, J) logits;
        loss is the negative log softmax probability of the true class.
        ``threshold-sign``: params is a scalar threshold on a single
        feature; see ``positive_above``.
    top_k
        Carried along for error metrics that need it; must be >= 1.
    positive_above
        Orientation of the threshold rule.  True (default) scores the
        error of "predict class 1 iff x >= threshold", whose population
        risk matches the closed-form risk of the power-density test bed
        in :mod:`werm.analytic`.  False scores the opposite rule, which
        reads the raw sign indicator with errors for positives at or
        above the threshold.
    """

    kind: str
    top_k: int = 1
    positive_above: bool = True

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValidationError(f"unknown loss kind {self.kind!r}")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")


def per_record_losses(data: Dataset, loss: LossSpec, params) -> np.ndarray:
    """Evaluate loss(params, z_i) for every record, as a float vector."""
    if loss.kind == "threshold-sign":
        if data.d != 1:
            raise SchemaError("threshold-sign loss needs scalar features")
        if data.labels is None:
            raise SchemaError("threshold-sign loss needs binary labels")
        if data.labels.max() > 1:
            raise SchemaError("threshold-sign loss needs binary labels")
        theta = float(params)
        above = data.features[:, 0] >= theta
        pos = data.labels == 1
        if loss.positive_above:
            wrong = np.where(pos, ~above, above)
        else:
            wrong = np.where(pos, above, ~above)
        return wrong.astype(float)

    if loss.kind == "zero-one-classification":
        if data.labels is None:
            raise SchemaError("zero-one loss needs labels")
        pred = np.asarray(params(data.features))
        if pred.shape != (data.n,):
            raise SchemaError("predictor must return one class id per record")
        return (pred != data.labels).astype(float)

    # softmax-cross-entropy
    if data.labels is None:
        raise SchemaError("cross-entropy loss needs labels")
    logits = np.asarray(params(data.features), dtype=float)
    if logits.shape != (data.n, data.n_classes):
        raise SchemaError(
            f"logit matrix must have shape {(data.n, data.n_classes)}"
        )
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    return -log_softmax(logits)[np.arange(data.n), data.labels]


def empirical_risk(data: Dataset, loss: LossSpec, params) -> float:
    """(1/n) * sum_i loss(params, z_i)."""
    return float(np.mean(per_record_losses(data, loss, params)))


def weighted_empirical_risk(
    data: Dataset, w: WeightVector, loss: LossSpec, params
) -> float:
    """(1/n) * sum_i w_i * loss(params, z_i)."""
    if len(w) != data.n:
        raise SchemaError(f"weight length {len(w)} != dataset size {data.n}")
    return float(np.mean(w.weights * per_record_losses(data, loss, params)))


# ---------------------------------------------------------------------------
# Softmax and classification metrics
# ---------------------------------------------------------------------------


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log softmax with max-logit subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def classification_metrics(data: Dataset, logits: np.ndarray, k: int) -> dict:
    """Miss rate, top-k error, and mean cross-entropy of given logits.

    Ties in the logit ranking are broken toward the lowest class id, so
    the metrics are deterministic.  ``miss_rate`` equals the top-1 error.
    """
    if data.labels is None:
        raise SchemaError("metrics need labels")
    logits = np.asarray(logits, dtype=float)
    J = data.n_classes
    if logits.shape != (data.n, J):
        raise SchemaError(f"logits must have shape {(data.n, J)}")
    if k < 1 or k > J:
        raise ValidationError(f"top-k with k={k} invalid for {J} classes")
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")

    # Stable argsort of -logits keeps ascending class id within ties.
    order = np.argsort(-logits, axis=1, kind="stable")
    ranks = np.argmax(order == data.labels[:, None], axis=1)
    miss_rate = float(np.mean(ranks != 0))
    top_k_error = float(np.mean(ranks >= k))
    mean_sce = float(
        np.mean(-log_softmax(logits)[np.arange(data.n), data.labels])
    )
    return {"miss_rate": miss_rate, "top_k_error": top_k_error, "mean_sce": mean_sce}


# ---------------------------------------------------------------------------
# CSV input / output
# ---------------------------------------------------------------------------

_OPTIONAL_COLUMNS = ("y", "s", "t", "e")


def _check_column(arr: np.ndarray, n: int, name: str) -> None:
    if arr.ndim != 1 or arr.shape[0] != n:
        raise SchemaError(f"{name} must be a length-{n} vector")


def _parse_header(header: list[str]) -> tuple[int, dict[str, int]]:
    positions = {name: i for i, name in enumerate(header)}
    if len(positions) != len(header):
        raise SchemaError("duplicate CSV column names")
    x_cols = [name for name in header if name.startswith("x")]
    for name in header:
        if name in _OPTIONAL_COLUMNS or name.startswith("x"):
            continue
        raise SchemaError(f"unknown CSV column {name!r}")
    d = len(x_cols)
    if d == 0:
        raise SchemaError("CSV needs at least one feature column x0")
    expected = [f"x{j}" for j in range(d)]
    if sorted(x_cols) != sorted(expected):
        raise SchemaError("feature columns must be x0..x{d-1} with no gaps")
    return d, positions


def read_csv(path) -> Dataset:
    """Parse a dataset CSV; malformed cells raise with their file line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        d, pos = _parse_header([h.strip() for h in header])
        feats, ys, ss, ts, es = [], [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}: line {line_no}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                feats.append([float(row[pos[f'x{j}']]) for j in range(d)])
                if "y" in pos:
                    ys.append(int(row[pos["y"]]))
                if "s" in pos:
                    ss.append(int(row[pos["s"]]))
                if "t" in pos:
                    ts.append(float(row[pos["t"]]))
                if "e" in pos:
                    cell = row[pos["e"]].strip()
                    if cell not in ("0", "1"):
                        raise ValueError(f"event flag must be 0/1, got {cell!r}")
                    es.append(cell == "1")
            except ValueError as exc:
                raise SchemaError(f"{path}: line {line_no}: {exc}") from exc
    if not feats:
        raise SchemaError(f"{path}: no data rows")
    if ("t" in pos) != ("e" in pos):
        raise SchemaError(f"{path}: columns t and e must appear together")
    return Dataset(
        features=np.asarray(feats, dtype=float),
        labels=np.asarray(ys) if ys else None,
        strata=np.asarray(ss) if ss else None,
        times=np.asarray(ts) if ts else None,
        events=np.asarray(es) if es else None,
    )


def write_csv(data: Dataset, path) -> None:
    header = [f"x{j}" for j in range(data.d)]
    cols: list[np.ndarray] = []
    if data.labels is not None:
        header.append("y")
        cols.append(data.labels)
    if data.strata is not None:
        header.append("s")
        cols.append(data.strata)
    if data.times is not None:
        header.extend(["t", "e"])
        cols.extend([data.times, data.events.astype(int)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.features[i]]
            row.extend(str(int(c[i])) if c.dtype != float else repr(float(c[i])) for c in cols)
            writer.writerow(row)
