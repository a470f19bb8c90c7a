"""Summary statistics used as constraint functions.

Every statistic works on a single dataset (1-d array) and, for speed inside
samplers, on a stack of equal-length datasets (2-d array, one row each).
Quantiles use linear interpolation between order statistics at plotting
positions (j - 1)/(n - 1), numpy's default ``linear`` method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class DomainError(ValueError):
    pass


class LengthError(ValueError):
    pass


def raw_moment(x, order: float) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 1:
        raise LengthError("raw moment needs at least one observation")
    if order <= 0:
        raise DomainError(f"moment order must be positive, got {order}")
    if float(order) != int(order) and np.any(x < 0):
        raise DomainError("fractional moment of negative data is undefined")
    return float(np.mean(x**order))


def quantile(x, level: float) -> float:
    x = np.asarray(x, dtype=float)
    if not 0.0 <= level <= 1.0:
        raise DomainError(f"quantile level must lie in [0, 1], got {level}")
    if x.size < 1:
        raise LengthError("quantile needs at least one observation")
    return float(np.quantile(x, level))


def up_crossing(x, threshold: float) -> float:
    """Fraction of observations at or above ``threshold``."""
    x = np.asarray(x, dtype=float)
    if x.size < 1:
        raise LengthError("up-crossing proportion needs at least one observation")
    return float(np.mean(x >= threshold))


def lag1_autocov_squares(x) -> float:
    """Lag-one sample autocovariance of the squared series, divisor n."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise LengthError("lag-1 autocovariance needs at least two observations")
    s = x * x
    d = s - s.mean()
    return float(np.dot(d[:-1], d[1:]) / x.size)


# -- descriptors --------------------------------------------------------------


@dataclass(frozen=True)
class RawMoment:
    order: float

    def __post_init__(self):
        if not self.order > 0:
            raise DomainError(f"moment order must be positive, got {self.order}")

    @property
    def label(self):
        return f"moment_{self.order:g}"

    def __call__(self, x):
        return raw_moment(x, self.order)

    def batch(self, X):
        if float(self.order) != int(self.order) and np.any(X < 0):
            raise DomainError("fractional moment of negative data is undefined")
        if self.order == 1:
            return X.mean(axis=1)
        return (X**self.order).mean(axis=1)


@dataclass(frozen=True)
class Quantile:
    level: float

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise DomainError(f"quantile level must lie in [0, 1], got {self.level}")

    @property
    def label(self):
        return f"quantile_{self.level:g}"

    def __call__(self, x):
        return quantile(x, self.level)

    def batch(self, X):
        return np.quantile(X, self.level, axis=1)


@dataclass(frozen=True)
class UpCrossing:
    threshold: float

    @property
    def label(self):
        return f"upcross_{self.threshold:g}"

    def __call__(self, x):
        return up_crossing(x, self.threshold)

    def batch(self, X):
        return (X >= self.threshold).mean(axis=1)


@dataclass(frozen=True)
class Lag1AutocovSquares:
    @property
    def label(self):
        return "lag1_autocov_sq"

    def __call__(self, x):
        return lag1_autocov_squares(x)

    def batch(self, X):
        if X.shape[1] < 2:
            raise LengthError("lag-1 autocovariance needs at least two observations")
        S = X * X
        D = S - S.mean(axis=1, keepdims=True)
        return np.einsum("ij,ij->i", D[:, :-1], D[:, 1:]) / X.shape[1]


@dataclass(frozen=True)
class QuantileOfAbs:
    level: float

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise DomainError(f"quantile level must lie in [0, 1], got {self.level}")

    @property
    def label(self):
        return f"abs_quantile_{self.level:g}"

    def __call__(self, x):
        return quantile(np.abs(x), self.level)

    def batch(self, X):
        return np.quantile(np.abs(X), self.level, axis=1)


# Named statistics for anything not covered above; each maps a 1-d array to a float.
CUSTOM_STATISTICS: dict[str, Callable[[np.ndarray], float]] = {
    "mean": lambda x: float(np.mean(x)),
    "median": lambda x: float(np.median(x)),
    "min": lambda x: float(np.min(x)),
    "max": lambda x: float(np.max(x)),
}


def register_statistic(name: str, fn: Callable[[np.ndarray], float]) -> None:
    CUSTOM_STATISTICS[name] = fn


@dataclass(frozen=True)
class Custom:
    name: str

    @property
    def label(self):
        return self.name

    def __call__(self, x):
        try:
            fn = CUSTOM_STATISTICS[self.name]
        except KeyError:
            raise DomainError(f"unknown custom statistic {self.name!r}") from None
        return float(fn(np.asarray(x, dtype=float)))

    def batch(self, X):
        return np.array([self(row) for row in X])


Descriptor = RawMoment | Quantile | UpCrossing | Lag1AutocovSquares | QuantileOfAbs | Custom

_KINDS = {
    "raw_moment": (RawMoment, "order"),
    "quantile": (Quantile, "level"),
    "up_crossing": (UpCrossing, "threshold"),
    "lag1_autocov_squares": (Lag1AutocovSquares, None),
    "quantile_of_abs": (QuantileOfAbs, "level"),
    "custom": (Custom, "name"),
}


@dataclass(frozen=True)
class SummaryVector:
    values: np.ndarray
    labels: tuple[str, ...]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SummarySpec:
    descriptors: tuple

    def __post_init__(self):
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        if not self.descriptors:
            raise ValueError("a summary spec needs at least one statistic")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"summary labels must be unique, got {self.labels}")

    def __len__(self):
        return len(self.descriptors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(d.label for d in self.descriptors)

    def to_json(self) -> list[dict]:
        out = []
        for d in self.descriptors:
            for kind, (cls, field) in _KINDS.items():
                if type(d) is cls:
                    item = {"kind": kind}
                    if field is not None:
                        item[field] = getattr(d, field)
                    out.append(item)
        return out

    @classmethod
    def from_json(cls, items: Sequence[dict]) -> "SummarySpec":
        descriptors = []
        for item in items:
            kind = item.get("kind")
            if kind not in _KINDS:
                raise ValueError(f"unknown summary kind {kind!r}; expected one of {sorted(_KINDS)}")
            klass, field = _KINDS[kind]
            if field is None:
                descriptors.append(klass())
            else:
                if field not in item:
                    raise ValueError(f"summary kind {kind!r} requires field {field!r}")
                descriptors.append(klass(item[field]))
        return cls(tuple(descriptors))


def apply_spec(spec: SummarySpec, x) -> SummaryVector:
    x = np.asarray(x, dtype=float)
    return SummaryVector(np.array([d(x) for d in spec.descriptors]), spec.labels)


def apply_spec_batch(spec: SummarySpec, X) -> np.ndarray:
    """Summaries of each row of ``X``; returns an (m, r) array."""
    X = np.asarray(X, dtype=float)
    return np.column_stack([d.batch(X) for d in spec.descriptors])
