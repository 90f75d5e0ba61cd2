"""Seeded synthetic data generators used by experiments and coverage checks.

All generators draw through ``np.random.default_rng(seed)`` and are
deterministic per seed.  The stratum-conditional laws depend only on the
generator's parameters, never on the stratum probabilities used for a
particular draw, so resampling with different stratum distributions is a
pure stratum-shift: the within-stratum feature/label laws stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, ValidationError
from .weights import WeightVector

__all__ = [
    "GaussianStrataSpec",
    "gaussian_strata_sample",
    "StratifiedThresholdModel",
    "CensoredSpec",
    "censored_train_sample",
    "censored_test_sample",
    "oracle_censoring_weights",
]


@dataclass(frozen=True)
class GaussianStrataSpec:
    """K-strata, J-class planar Gaussian mixture.

    Class j has a base mean on a circle of radius ``class_radius`` at
    angle 2*pi*j/J; stratum k rotates the whole class layout by
    k * rotation_deg degrees.  Labels are uniform within every stratum,
    so strata differ only in where the classes sit: a model trained on a
    skewed stratum mix places its boundaries for the dominant rotations.
    """

    n_strata: int = 5
    n_classes: int = 3
    class_radius: float = 2.0
    rotation_deg: float = 22.5
    noise: float = 1.0

    def __post_init__(self):
        if self.n_strata < 1 or self.n_classes < 2:
            raise ValidationError("need n_strata >= 1 and n_classes >= 2")
        if self.noise <= 0:
            raise ValidationError("noise must be > 0")

    def mean(self, stratum: int, label: int) -> np.ndarray:
        angle = 2.0 * np.pi * label / self.n_classes + np.deg2rad(
            self.rotation_deg * stratum
        )
        return self.class_radius * np.array([np.cos(angle), np.sin(angle)])


def gaussian_strata_sample(
    spec: GaussianStrataSpec, n: int, pk, seed
) -> Dataset:
    """n records with strata ~ pk, uniform labels, Gaussian features."""
    pk = np.asarray(pk, dtype=float)
    if pk.size != spec.n_strata or abs(pk.sum() - 1.0) > 1e-9 or pk.min() < 0:
        raise ValidationError("pk must be a distribution over the strata")
    rng = np.random.default_rng(seed)
    strata = rng.choice(spec.n_strata, size=n, p=pk)
    labels = rng.integers(spec.n_classes, size=n)
    angles = 2.0 * np.pi * labels / spec.n_classes + np.deg2rad(
        spec.rotation_deg * strata
    )
    means = spec.class_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    feats = means + spec.noise * rng.standard_normal((n, 2))
    return Dataset(
        features=feats,
        labels=labels,
        strata=strata,
        n_classes=spec.n_classes,
        n_strata=spec.n_strata,
    )


@dataclass(frozen=True)
class StratifiedThresholdModel:
    """1-d stratified source for deviation studies: X ~ U[0,1] in every
    stratum, with a stratum-specific positive-label rate."""

    pos_rates: tuple[float, ...]

    def __post_init__(self):
        rates = np.asarray(self.pos_rates, dtype=float)
        if rates.ndim != 1 or rates.size == 0:
            raise ValidationError("pos_rates must be a nonempty vector")
        if rates.min() <= 0 or rates.max() >= 1:
            raise ValidationError("pos_rates must lie in (0, 1)")

    @property
    def n_strata(self) -> int:
        return len(self.pos_rates)

    def sample(self, n: int, pk_train, seed) -> Dataset:
        pk_train = np.asarray(pk_train, dtype=float)
        if pk_train.size != self.n_strata:
            raise ValidationError("pk_train length must match the strata count")
        rng = np.random.default_rng(seed)
        strata = rng.choice(self.n_strata, size=n, p=pk_train)
        rates = np.asarray(self.pos_rates)[strata]
        labels = (rng.random(n) < rates).astype(int)
        x = rng.random(n)
        return Dataset(
            features=x[:, None],
            labels=labels,
            strata=strata,
            n_classes=2,
            n_strata=self.n_strata,
        )


# ---------------------------------------------------------------------------
# Right-censored durations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CensoredSpec:
    """Scalar covariate x ~ U[0,1]; event time exponential with
    log-rate ``slope * (x - 0.5)``; independent exponential censoring with
    rate ``censor_rate``.  The classification target is whether the event
    happens by ``horizon``.  Long durations are censored more often, so
    the uncensored subsample over-represents early events; IPCW undoes
    that."""

    slope: float = 1.5
    censor_rate: float = 0.5
    horizon: float = 1.0

    def event_rate(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.slope * (x - 0.5))

    def censor_survival(self, t: np.ndarray) -> np.ndarray:
        return np.exp(-self.censor_rate * np.asarray(t, dtype=float))


def censored_train_sample(spec: CensoredSpec, n: int, seed) -> Dataset:
    """Training view: (x, observed time, event flag) plus the horizon label
    computed from the observed time (meaningful only where event=1; the
    weighting schemes give censored records zero weight)."""
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    y_time = rng.exponential(1.0 / spec.event_rate(x))
    c_time = rng.exponential(1.0 / spec.censor_rate, size=n)
    observed = np.minimum(y_time, c_time)
    event = y_time <= c_time
    labels = (observed <= spec.horizon).astype(int)
    return Dataset(
        features=x[:, None],
        labels=labels,
        times=observed,
        events=event,
        n_classes=2,
    )


def censored_test_sample(spec: CensoredSpec, n: int, seed) -> Dataset:
    """Test view: uncensored durations, labels = event by the horizon."""
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    y_time = rng.exponential(1.0 / spec.event_rate(x))
    labels = (y_time <= spec.horizon).astype(int)
    return Dataset(features=x[:, None], labels=labels, n_classes=2)


def oracle_censoring_weights(spec: CensoredSpec, data: Dataset) -> WeightVector:
    """Exact IPCW weights event / S_cens(t) from the known censoring law."""
    if data.times is None:
        raise ValidationError("dataset has no survival fields")
    w = np.zeros(data.n)
    unc = np.flatnonzero(data.events)
    w[unc] = 1.0 / spec.censor_survival(data.times[unc])
    return WeightVector(w)
