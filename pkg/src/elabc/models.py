"""Benchmark generative models: normal location, g-and-k, ARCH(1), stereology.

Each simulator is a pure function of (theta, n, generator).  The
stereological model here is a simplified stand-in for the elliptical
inclusion model; see :func:`simulate_stereo`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, NamedTuple

import numba
import numpy as np
from scipy.special import ndtri

from .summaries import (
    CUSTOM_STATISTICS,
    DomainError,
    Custom,
    Lag1AutocovSquares,
    Quantile,
    QuantileOfAbs,
    RawMoment,
    SummarySpec,
    SummaryVector,
    apply_spec,
    apply_spec_batch,
)

GK_C = 0.8
STEREO_THRESHOLD = 5.0
STEREO_OBSERVED_COUNT = 112


# -- normal location model ---------------------------------------------------


def simulate_normal(mu: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return mu + rng.standard_normal(n)


# -- g-and-k -----------------------------------------------------------------


class GKParams(NamedTuple):
    A: float
    B: float
    g: float
    k: float

    def validate(self):
        if not self.B > 0:
            raise DomainError(f"g-and-k scale B must be positive, got {self.B}")
        if not self.k > -0.5:
            raise DomainError(f"g-and-k kurtosis k must exceed -0.5, got {self.k}")
        return self


def _gk_from_z(z, A, B, g, k, c=GK_C):
    # (1 - e^{-gz}) / (1 + e^{-gz}) == tanh(gz / 2)
    return A + B * (1.0 + c * np.tanh(0.5 * g * z)) * (1.0 + z * z) ** k * z


def gk_quantile(p, theta) -> float | np.ndarray:
    A, B, g, k = GKParams(*theta).validate()
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise DomainError("g-and-k quantile level must lie strictly inside (0, 1)")
    out = _gk_from_z(ndtri(p), A, B, g, k)
    return float(out) if out.ndim == 0 else out


def simulate_gk(theta, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Inverse-CDF sampling; z(U) for uniform U is drawn directly as N(0, 1)."""
    A, B, g, k = GKParams(*theta).validate()
    z = rng.standard_normal(n if size is None else (size, n))
    return _gk_from_z(z, A, B, g, k)


# -- ARCH(1) -----------------------------------------------------------------


class ArchParams(NamedTuple):
    alpha0: float
    alpha1: float

    def validate(self):
        if not self.alpha0 > 0:
            raise DomainError(f"alpha0 must be positive, got {self.alpha0}")
        if not 0 < self.alpha1 < 1:
            raise DomainError(f"alpha1 must lie in (0, 1) for stationarity, got {self.alpha1}")
        return self


@numba.njit(cache=True)
def _arch_paths(eps, alpha0, alpha1):
    m, n = eps.shape
    out = np.empty_like(eps)
    var0 = alpha0 / (1.0 - alpha1)
    for i in range(m):
        var = var0
        for j in range(n):
            x = np.sqrt(var) * eps[i, j]
            out[i, j] = x
            var = alpha0 + alpha1 * x * x
    return out


def simulate_arch1(theta, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """X_j = sigma_j eps_j, sigma_j^2 = alpha0 + alpha1 X_{j-1}^2, started at the stationary variance."""
    a0, a1 = ArchParams(*theta).validate()
    eps = rng.standard_normal((1 if size is None else size, n))
    out = _arch_paths(eps, float(a0), float(a1))
    return out[0] if size is None else out


# -- stereological extremes ----------------------------------------------------


class StereoParams(NamedTuple):
    lam: float
    sigma: float
    xi: float

    def validate(self):
        if not self.lam > 0:
            raise DomainError(f"Poisson rate must be positive, got {self.lam}")
        if not self.sigma > 0:
            raise DomainError(f"GPD scale must be positive, got {self.sigma}")
        return self


def gpd_excess(u, sigma: float, xi: float) -> np.ndarray:
    """Inverse CDF of the generalised Pareto excess at levels ``u`` in [0, 1)."""
    tail = 1.0 - np.asarray(u, dtype=float)
    if abs(xi) < 1e-12:
        return -sigma * np.log(tail)
    return sigma / xi * np.expm1(-xi * np.log(tail))


def _stereo_planar(count: int, sigma: float, xi: float, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(0)
    while out.size < count:
        need = count - out.size
        batch = int(1.6 * need) + 8
        big = STEREO_THRESHOLD + gpd_excess(rng.random(batch), sigma, xi)
        ratios = rng.random((batch, 2))
        axes = np.column_stack([big, big[:, None] * ratios])
        perp = rng.integers(0, 3, size=batch)
        # size-biased slicing: keep with probability (perpendicular diameter) / V
        keep = rng.random(batch) * big < axes[np.arange(batch), perp]
        offset = rng.uniform(-1.0, 1.0, size=batch)
        axes[np.arange(batch), perp] = -np.inf
        planar = axes.max(axis=1) * np.sqrt(1.0 - offset * offset)
        out = np.concatenate([out, planar[keep][:need]])
    return out


def simulate_stereo(theta, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Observed planar largest diameters of inclusions cut by one plane.

    Simplified cross-section model, not the exact elliptical model:

    * the number of sectioned inclusions is ``L ~ Poisson(lam)``;
    * each inclusion has largest diameter ``V = 5 + GPD(sigma, xi)`` and
      two further principal diameters ``V U1``, ``V U2`` with ``U ~ U[0, 1]``;
    * one principal axis, picked uniformly, is perpendicular to the plane and
      the inclusion is retained with probability (that diameter) / V, so
      sectioned inclusions are size-biased;
    * the recorded diameter is the larger in-plane axis times ``sqrt(1 - D^2)``
      with ``D ~ U(-1, 1)`` the relative offset of the plane from the centre.

    ``n`` fixes L instead of drawing it (used to build fixtures).
    """
    lam, sigma, xi = StereoParams(*theta).validate()
    count = int(rng.poisson(lam)) if n is None else int(n)
    return _stereo_planar(count, float(sigma), float(xi), rng)


def _guard_empty(fn):
    def wrapped(x):
        return np.nan if x.size == 0 else float(fn(x))

    return wrapped


# Count statistics use len(x); the rest are undefined (NaN) on an empty section.
CUSTOM_STATISTICS.update(
    {
        "stereo_count": lambda x: (x.size - STEREO_OBSERVED_COUNT) / 100.0,
        "stereo_count_112": lambda x: (x.size - STEREO_OBSERVED_COUNT) / 112.0,
        "stereo_mean": _guard_empty(np.mean),
        "stereo_median": _guard_empty(np.median),
        "stereo_min": _guard_empty(np.min),
        "stereo_max": _guard_empty(np.max),
        "stereo_prop_le_6": _guard_empty(lambda x: np.mean(x <= 6.0)),
    }
)

STEREO_SUMMARIES = SummarySpec(
    (Custom("stereo_count"), Custom("stereo_mean"), Custom("stereo_median"), Custom("stereo_prop_le_6"))
)
STEREO_HARD_SUMMARIES = SummarySpec(
    (Custom("stereo_count_112"), Custom("stereo_min"), Custom("stereo_max"), Custom("stereo_median"))
)


def stereo_summaries(data) -> SummaryVector:
    """((L - 112)/100, mean, median, fraction <= 6); NaN entries when L = 0.

    NaN summaries make the EL and synthetic likelihoods return zero rather
    than raise, so samplers simply reject such draws.
    """
    return apply_spec(STEREO_SUMMARIES, np.asarray(data, dtype=float))


def load_stereo_observed() -> np.ndarray:
    """The bundled synthetic stand-in for the 112 observed inclusion diameters."""
    path = resources.files("elabc") / "data" / "stereo_observed.csv"
    with resources.as_file(path) as p:
        return load_observed_csv(p)


def load_observed_csv(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, comments="#", dtype=float))


def save_observed_csv(path, data, header: str = "") -> None:
    np.savetxt(path, np.asarray(data, dtype=float), fmt="%.17g", header=header)


# -- model container -------------------------------------------------------------


@dataclass(frozen=True)
class GenerativeModel:
    name: str
    param_names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    simulate: Callable  # (theta, n, rng) -> dataset
    simulate_many: Callable  # (theta, n, m, rng) -> (m, n) array or list of datasets
    summary_spec: SummarySpec
    true_theta: np.ndarray
    default_n: int
    default_m: int
    log_density: Callable | None = None  # prior log density inside the box; uniform if None
    ragged: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.param_names)

    def in_support(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(theta.shape == (self.dim,) and np.all(theta > self.lower) and np.all(theta < self.upper))

    def log_prior(self, theta) -> float:
        if not self.in_support(theta):
            return -np.inf
        if self.log_density is None:
            return float(-np.sum(np.log(self.upper - self.lower)))
        return float(self.log_density(np.asarray(theta, dtype=float)))

    def sample_prior(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        if self.name == "normal":
            # N(0, 1) restricted to the box; the box is wide enough that this rarely loops
            draws = rng.standard_normal((1 if size is None else size, 1))
            bad = ~np.all((draws > self.lower) & (draws < self.upper), axis=1)
            while bad.any():
                draws[bad] = rng.standard_normal((bad.sum(), 1))
                bad = ~np.all((draws > self.lower) & (draws < self.upper), axis=1)
        else:
            draws = rng.uniform(self.lower, self.upper, size=(1 if size is None else size, self.dim))
            # open box: nudge the measure-zero lower edge inward
            draws = np.where(draws <= self.lower, np.nextafter(self.lower, self.upper), draws)
        return draws[0] if size is None else draws

    def summarize(self, data) -> np.ndarray:
        return apply_spec(self.summary_spec, data).values

    def summarize_many(self, datasets) -> np.ndarray:
        if self.ragged:
            return np.array([self.summarize(x) for x in datasets]).reshape(len(datasets), -1)
        return apply_spec_batch(self.summary_spec, datasets)

    def with_summaries(self, spec: SummarySpec) -> "GenerativeModel":
        return dataclasses.replace(self, summary_spec=spec)


def _normal_model():
    return GenerativeModel(
        name="normal",
        param_names=("mu",),
        lower=np.array([-10.0]),
        upper=np.array([10.0]),
        simulate=lambda th, n, rng: simulate_normal(th[0], n, rng),
        simulate_many=lambda th, n, m, rng: th[0] + rng.standard_normal((m, n)),
        summary_spec=SummarySpec((RawMoment(1),)),
        true_theta=np.array([0.0]),
        default_n=100,
        default_m=25,
        log_density=lambda th: float(-0.5 * np.log(2 * np.pi) - 0.5 * th[0] ** 2),
    )


def _gk_model():
    return GenerativeModel(
        name="gk",
        param_names=("A", "B", "g", "k"),
        lower=np.zeros(4),
        upper=np.full(4, 10.0),
        simulate=lambda th, n, rng: simulate_gk(th, n, rng),
        simulate_many=lambda th, n, m, rng: simulate_gk(th, n, rng, size=m),
        summary_spec=SummarySpec((RawMoment(1), Quantile(0.25), Quantile(0.5), Quantile(0.75))),
        true_theta=np.array([3.0, 1.0, 2.0, 0.5]),
        default_n=1000,
        default_m=40,
        # prior used by the rejection-ABC reference runs
        extra={"abc_lower": np.array([2.0, 0.0, 0.0, 0.0]), "abc_upper": np.array([4.0, 2.0, 4.0, 1.0])},
    )


def _arch_model():
    return GenerativeModel(
        name="arch1",
        param_names=("alpha0", "alpha1"),
        lower=np.array([0.0, 0.0]),
        upper=np.array([5.0, 1.0]),
        simulate=lambda th, n, rng: simulate_arch1(th, n, rng),
        simulate_many=lambda th, n, m, rng: simulate_arch1(th, n, rng, size=m),
        summary_spec=SummarySpec(
            (Lag1AutocovSquares(), QuantileOfAbs(0.25), QuantileOfAbs(0.5), QuantileOfAbs(0.75))
        ),
        true_theta=np.array([3.0, 0.75]),
        default_n=1000,
        default_m=20,
    )


def _stereo_model():
    return GenerativeModel(
        name="stereo",
        param_names=("lambda", "sigma", "xi"),
        lower=np.array([1.0, 0.0, -5.0]),
        upper=np.array([200.0, 10.0, 5.0]),
        simulate=lambda th, n, rng: simulate_stereo(th, rng),
        simulate_many=lambda th, n, m, rng: [simulate_stereo(th, rng) for _ in range(m)],
        summary_spec=STEREO_SUMMARIES,
        true_theta=np.array([112.0, 6.0, 0.1]),
        default_n=STEREO_OBSERVED_COUNT,
        default_m=25,
        ragged=True,
    )


_BUILDERS = {"normal": _normal_model, "gk": _gk_model, "arch1": _arch_model, "stereo": _stereo_model}
MODEL_NAMES = tuple(_BUILDERS)


def get_model(name: str) -> GenerativeModel:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown example {name!r}; expected one of {list(MODEL_NAMES)}") from None
