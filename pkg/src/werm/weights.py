"""Plug-in importance-weight estimators for four sample-selection-bias settings.

Every estimator returns a :class:`~werm.core.WeightVector` scaled so that
``(1/n) * sum_i w_i * loss_i`` evaluated by :func:`werm.core.weighted_empirical_risk`
equals the intended reweighted objective; count-based plug-ins therefore
carry a factor n (w_i = n * rate / count).

Settings
--------
class shift
    Train and test share class-conditional feature laws but differ in the
    positive rate; the likelihood ratio depends on the label only.
stratum shift
    Same, with strata in place of labels: w_i = n * p_k / n_k for the
    record's stratum k, where p_k is the known test stratum probability.
positive-unlabeled
    Training data pools labeled positives (label 1) with unlabeled
    records (label 0); weights 2*p*n/n_pos and n/n_unl make the weighted
    0/1 risk an estimate of the test risk up to the constant offset -p
    (see :func:`pu_risk_offset`).
right censoring
    Records carry an observed duration and an event flag; uncensored
    records are weighted by the inverse of the estimated censoring
    survival just before their time (IPCW), censored records get zero.
    The censoring survival is a marginal Kaplan-Meier estimate; the
    artifact assumes test-side durations are never censored, which is an
    assumption about the data, not something the code can check.

``oracle_*`` variants return the exact likelihood-ratio weights for a
known generating mechanism; they exist so experiments can separate
estimation error from the effect of reweighting itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Dataset,
    DegenerateClassError,
    EmptyStratumError,
    PositivityViolationError,
    SchemaError,
    ValidationError,
    WeightVector,
)

__all__ = [
    "TargetPrior",
    "EtaEstimate",
    "KmCurve",
    "class_shift_weights",
    "stratum_shift_weights",
    "pu_weights",
    "pu_risk_offset",
    "pu_weights_eta",
    "km_fit",
    "ipcw_weights",
    "oracle_class_shift_weights",
    "oracle_stratum_shift_weights",
    "oracle_pu_weights",
]


@dataclass(frozen=True)
class TargetPrior:
    """Known test-side information.

    p
        Test positive rate, in (0, 1).
    pk
        Test stratum probabilities; entries in [0, 1] summing to 1.
        (A single stratum with pk = [1.0] is legitimate.)
    zeta
        Budget for prior inaccuracy |p_guess - p|, >= 0.
    """

    p: float | None = None
    pk: tuple[float, ...] | None = None
    zeta: float = 0.0

    def __post_init__(self):
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise ValidationError("p must lie in (0, 1)")
        if self.pk is not None:
            pk = np.asarray(self.pk, dtype=float)
            if pk.ndim != 1 or pk.size == 0:
                raise ValidationError("pk must be a nonempty vector")
            if pk.min() < 0.0 or pk.max() > 1.0:
                raise ValidationError("pk entries must lie in [0, 1]")
            if abs(pk.sum() - 1.0) > 1e-12:
                raise ValidationError("pk must sum to 1 within 1e-12")
            object.__setattr__(self, "pk", tuple(float(v) for v in pk))
        if self.zeta < 0.0:
            raise ValidationError("zeta must be >= 0")

    def pk_array(self) -> np.ndarray:
        if self.pk is None:
            raise ValidationError("prior has no stratum probabilities")
        return np.asarray(self.pk, dtype=float)


class EtaEstimate:
    """A posterior-probability score: feature matrix (n, d) -> values in [0, 1].

    Output of the wrapped callable is clamped to [0, 1].  The wrapped
    callable must be deterministic (equal inputs give equal outputs).
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self._fn = fn

    def __call__(self, features: np.ndarray) -> np.ndarray:
        out = np.asarray(self._fn(np.atleast_2d(features)), dtype=float)
        return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Label / stratum plug-ins
# ---------------------------------------------------------------------------


def _binary_counts(data: Dataset) -> tuple[int, int]:
    if data.labels is None:
        raise SchemaError("dataset has no labels")
    if data.labels.max() > 1:
        raise SchemaError("binary labels required")
    n_pos = data.n_pos
    n_neg = data.n - n_pos
    return n_pos, n_neg


def class_shift_weights(data: Dataset, prior: TargetPrior) -> WeightVector:
    """w_i = n*p/n_pos for label 1, n*(1-p)/n_neg for label 0.

    The weight vector has mean exactly 1 whenever both classes are
    populated; empty classes raise :class:`DegenerateClassError`.
    """
    if prior.p is None:
        raise ValidationError("class shift weights need prior.p")
    n_pos, n_neg = _binary_counts(data)
    if n_pos == 0:
        raise DegenerateClassError(1)
    if n_neg == 0:
        raise DegenerateClassError(0)
    n = data.n
    w_pos = n * prior.p / n_pos
    w_neg = n * (1.0 - prior.p) / n_neg
    return WeightVector(np.where(data.labels == 1, w_pos, w_neg))


def stratum_shift_weights(data: Dataset, prior: TargetPrior) -> WeightVector:
    """w_i = n * p_k / n_k for the record's stratum k."""
    if data.strata is None:
        raise SchemaError("dataset has no strata")
    pk = prior.pk_array()
    if data.n_strata > pk.size:
        raise SchemaError(
            f"dataset has {data.n_strata} strata but prior gives {pk.size}"
        )
    counts = np.bincount(data.strata, minlength=pk.size)
    for k in np.flatnonzero((pk > 0) & (counts == 0)):
        raise EmptyStratumError(int(k))
    per_stratum = np.zeros(pk.size)
    populated = counts > 0
    per_stratum[populated] = data.n * pk[populated] / counts[populated]
    return WeightVector(per_stratum[data.strata])


def pu_weights(data: Dataset, prior: TargetPrior) -> WeightVector:
    """w_i = 2*p*n/n_pos for labeled positives, n/n_unl for unlabeled.

    With the plain 0/1 classification loss, ``(1/n) * sum w_i * loss_i``
    estimates the test risk shifted by the constant +p; add
    :func:`pu_risk_offset` to recover the risk estimate itself.
    """
    if prior.p is None:
        raise ValidationError("PU weights need prior.p")
    n_pos, n_unl = _binary_counts(data)
    if n_pos == 0:
        raise DegenerateClassError(1)
    if n_unl == 0:
        raise DegenerateClassError(0)
    n = data.n
    w_pos = 2.0 * prior.p * n / n_pos
    w_unl = n / n_unl
    return WeightVector(np.where(data.labels == 1, w_pos, w_unl))


def pu_risk_offset(prior: TargetPrior) -> float:
    """The constant -p completing the PU risk estimate."""
    if prior.p is None:
        raise ValidationError("PU offset needs prior.p")
    return -prior.p


def pu_weights_eta(data: Dataset, prior: TargetPrior, eta: EtaEstimate) -> WeightVector:
    """w_i = n*p/n_pos for positives, (1 - eta(x_i)) / (1 - n_pos/n) for unlabeled.

    Plugging in the true posterior makes the weighted risk a consistent
    estimate of the test risk (no offset needed).
    """
    if prior.p is None:
        raise ValidationError("PU weights need prior.p")
    n_pos, n_unl = _binary_counts(data)
    if n_pos == 0:
        raise DegenerateClassError(1)
    if n_unl == 0:
        raise DegenerateClassError(0)
    n = data.n
    w = np.empty(n)
    pos = data.labels == 1
    w[pos] = n * prior.p / n_pos
    w[~pos] = (1.0 - eta(data.features[~pos])) / (1.0 - n_pos / n)
    return WeightVector(w)


# ---------------------------------------------------------------------------
# Oracle (exact likelihood-ratio) weights
# ---------------------------------------------------------------------------


def _check_rate(value: float, name: str) -> None:
    if not 0.0 < value < 1.0:
        raise ValidationError(f"{name} must lie in (0, 1)")


def oracle_class_shift_weights(data: Dataset, p: float, p_train: float) -> WeightVector:
    """Exact class-shift weights p/p_train and (1-p)/(1-p_train)."""
    _check_rate(p, "p")
    _check_rate(p_train, "p_train")
    _binary_counts(data)
    return WeightVector(
        np.where(data.labels == 1, p / p_train, (1.0 - p) / (1.0 - p_train))
    )


def oracle_stratum_shift_weights(data: Dataset, pk, pk_train) -> WeightVector:
    """Exact stratum-shift weights p_k / p_train_k."""
    if data.strata is None:
        raise SchemaError("dataset has no strata")
    pk = np.asarray(pk, dtype=float)
    pk_train = np.asarray(pk_train, dtype=float)
    if pk.shape != pk_train.shape:
        raise ValidationError("pk and pk_train must have equal length")
    if np.any((pk > 0) & (pk_train <= 0)):
        raise ValidationError("pk_train must be positive wherever pk is")
    ratio = np.zeros(pk.size)
    pos = pk_train > 0
    ratio[pos] = pk[pos] / pk_train[pos]
    return WeightVector(ratio[data.strata])


def oracle_pu_weights(data: Dataset, p: float, q: float) -> WeightVector:
    """Exact PU weights 2p/q for labeled positives and 1/(1-q) for unlabeled."""
    _check_rate(p, "p")
    _check_rate(q, "q")
    _binary_counts(data)
    return WeightVector(
        np.where(data.labels == 1, 2.0 * p / q, 1.0 / (1.0 - q))
    )


# ---------------------------------------------------------------------------
# Kaplan-Meier and IPCW
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KmCurve:
    """Product-limit survival estimate as a right-continuous step function.

    ``times`` holds the sorted distinct times at which the estimate drops
    (times with events only); ``survival[j]`` is S(times[j]).  Before the
    first drop S = 1.
    """

    times: np.ndarray
    survival: np.ndarray
    n_at_entry: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.survival, dtype=float)
        if t.shape != s.shape or t.ndim != 1:
            raise ValidationError("times and survival must be equal-length vectors")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValidationError("times must be strictly increasing")
        if s.size and (np.any(np.diff(s) > 1e-15) or s.min() < 0 or s.max() > 1):
            raise ValidationError("survival must be nonincreasing within [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "survival", s)

    def survival_at(self, t) -> np.ndarray:
        """S(t), right-continuous."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return np.concatenate(([1.0], self.survival))[idx]

    def survival_before(self, t) -> np.ndarray:
        """Left limit S(t-)."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="left")
        return np.concatenate(([1.0], self.survival))[idx]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "s"])
            for t, s in zip(self.times, self.survival):
                writer.writerow([repr(float(t)), repr(float(s))])

    @staticmethod
    def from_csv(path, n_at_entry: int = 0) -> "KmCurve":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["t", "s"]:
            raise SchemaError("survival CSV must have header 't,s'")
        vals = np.array([[float(a), float(b)] for a, b in rows[1:]])
        if vals.size == 0:
            vals = vals.reshape(0, 2)
        return KmCurve(times=vals[:, 0], survival=vals[:, 1], n_at_entry=n_at_entry)


def km_fit(times, events) -> KmCurve:
    """Kaplan-Meier product-limit estimator.

    ``events[i]`` is True when ``times[i]`` is an observed event of the
    distribution being estimated, False when it is censored for that
    purpose.  At tied times events are processed before censorings, i.e.
    records censored at t still count as at risk for events at t.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=bool)
    if t.ndim != 1 or t.shape != e.shape:
        raise ValidationError("times and events must be equal-length vectors")
    if t.size == 0:
        raise ValidationError("empty survival input")
    if not np.all(np.isfinite(t)) or t.min() < 0:
        raise ValidationError("times must be finite and >= 0")

    n = t.size
    order = np.argsort(t, kind="stable")
    t_sorted = t[order]
    e_sorted = e[order]
    uniq, start = np.unique(t_sorted, return_index=True)
    d = np.add.reduceat(e_sorted.astype(int), start)  # events per distinct time
    at_risk = n - start  # everyone with time >= uniq[j]
    drop = d > 0
    factors = 1.0 - d[drop] / at_risk[drop]
    return KmCurve(times=uniq[drop], survival=np.cumprod(factors), n_at_entry=n)


def ipcw_weights(data: Dataset, km: KmCurve) -> WeightVector:
    """w_i = event_i / S_cens(t_i-) with S_cens the censoring survival.

    ``km`` must be fitted on the censoring distribution, i.e. with the
    event indicator flipped: ``km_fit(times, ~events)``.  Censored
    records get weight 0; an uncensored record whose censoring survival
    has already hit zero raises :class:`PositivityViolationError`.
    """
    if data.times is None:
        raise SchemaError("dataset has no survival fields")
    w = np.zeros(data.n)
    unc = np.flatnonzero(data.events)
    if unc.size:
        s = km.survival_before(data.times[unc])
        bad = np.flatnonzero(s <= 0.0)
        if bad.size:
            raise PositivityViolationError(int(unc[bad[0]]))
        w[unc] = 1.0 / s
    return WeightVector(w)
