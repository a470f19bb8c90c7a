"""Run configurations and the studies built on them.

Outputs are plain CSV (arrays) and JSON (scalars, manifests).  Everything
written to the data files is a deterministic function of the configuration;
wall-clock timings go to a separate ``timing.json``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .models import MODEL_NAMES, STEREO_HARD_SUMMARIES, GenerativeModel, get_model, load_observed_csv, load_stereo_observed
from .pseudolik import EL, SYNTHETIC, EstimatorConfig, make_kernel
from .rng import substream
from .samplers import Chain, InitializationError, RWMConfig, SingularDesign, read_chain_csv, regression_adjust, rejection_abc, rwm_sample
from .summaries import SummarySpec

REJECTION_ABC = "rejection-abc"
METHODS = (EL, SYNTHETIC, REJECTION_ABC)

# Top-level substream keys used here (samplers use 0 and 1).
_DATA_STREAM = 2
_PILOT_STREAM = 3

_PILOT_CHAIN = 1_000_000
_START_TRIES = 5


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    example: str = "normal"
    method: str = EL
    n: int | None = None
    m: int | None = None
    iterations: int = 10_000
    burnin: int = 10_000
    seed: int = 0
    data_seed: int | None = None
    summaries: list | str | None = None
    output_dir: str = "out"
    data: str | None = None
    theta_true: list | None = None
    init: list | None = None
    proposal_scale: list | None = None
    adapt: bool = True
    pilot_draws: int = 5_000
    pilot_iterations: int = 2_000
    abc_n_total: int = 200_000
    abc_keep: int = 2_000
    abc_restricted_prior: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValidationError(f"unknown run configuration keys {unknown}; valid keys are {sorted(names)}")
        return cls(**d).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "RunConfig":
        if self.example not in MODEL_NAMES:
            raise ValidationError(f"unknown example {self.example!r}; choose one of {list(MODEL_NAMES)}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; choose one of {list(METHODS)}")
        for key in ("n", "m", "iterations", "pilot_draws", "pilot_iterations", "abc_n_total", "abc_keep"):
            value = getattr(self, key)
            if value is not None and (not isinstance(value, int) or value < 1):
                raise ValidationError(f"{key} must be a positive integer, got {value!r}")
        if not isinstance(self.burnin, int) or self.burnin < 0:
            raise ValidationError(f"burnin must be a non-negative integer, got {self.burnin!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        try:
            spec = summary_spec(self)
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"bad summaries entry: {exc}") from None
        model = get_model(self.example)
        if self.example == "stereo" and not all(d.label.startswith("stereo_") for d in spec.descriptors):
            raise ValidationError("stereology runs need the stereo_* custom summaries (or summaries='hard')")
        if self.example != "stereo" and any(
            getattr(d, "name", "").startswith("stereo_") for d in spec.descriptors
        ):
            raise ValidationError(f"stereo_* summaries only apply to the stereo example, not {self.example!r}")
        m = self.m or model.default_m
        if self.method == EL and m < 2:
            raise ValidationError("empirical likelihood needs m >= 2")
        if self.method == SYNTHETIC and m < len(spec) + 2:
            raise ValidationError(f"synthetic likelihood with {len(spec)} summaries needs m >= {len(spec) + 2}")
        if self.method == REJECTION_ABC and self.abc_keep > self.abc_n_total:
            raise ValidationError("abc_keep cannot exceed abc_n_total")
        for key in ("theta_true", "init", "proposal_scale"):
            value = getattr(self, key)
            if value is not None and len(value) != model.dim:
                raise ValidationError(f"{key} needs {model.dim} entries for {self.example!r}")
        if self.proposal_scale is not None and any(not v > 0 for v in self.proposal_scale):
            raise ValidationError("proposal_scale entries must be positive")
        return self


def summary_spec(cfg: RunConfig) -> SummarySpec:
    if cfg.summaries is None:
        return get_model(cfg.example).summary_spec
    if cfg.summaries == "hard":
        return STEREO_HARD_SUMMARIES
    if isinstance(cfg.summaries, str):
        raise ValueError(f"summaries must be a list of descriptors or 'hard', got {cfg.summaries!r}")
    return SummarySpec.from_json(cfg.summaries)


def build_model(cfg: RunConfig) -> GenerativeModel:
    return get_model(cfg.example).with_summaries(summary_spec(cfg))


def observed_data(cfg: RunConfig, model: GenerativeModel) -> np.ndarray:
    if cfg.data is not None:
        return load_observed_csv(cfg.data)
    if model.name == "stereo" and cfg.theta_true is None:
        return load_stereo_observed()
    theta = np.asarray(cfg.theta_true if cfg.theta_true is not None else model.true_theta, dtype=float)
    seed = cfg.seed if cfg.data_seed is None else cfg.data_seed
    return model.simulate(theta, cfg.n or model.default_n, substream(seed, _DATA_STREAM))


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def posterior_summary(draws: np.ndarray, names) -> dict:
    draws = np.asarray(draws, dtype=float).reshape(len(draws), -1)
    lo, hi = np.quantile(draws, [0.025, 0.975], axis=0)
    return {
        name: {
            "mean": float(draws[:, j].mean()),
            "sd": float(draws[:, j].std(ddof=1)) if len(draws) > 1 else 0.0,
            "ci95": [float(lo[j]), float(hi[j])],
        }
        for j, name in enumerate(names)
    }


# -- sampling ---------------------------------------------------------------------


def pilot_start(model, kernel, s_obs, cfg: RunConfig, rounds: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Starting point and diagonal proposal scales from a pilot.

    A few rounds of rejection ABC, each drawing from the bounding box of the
    previous round's kept draws, locate the posterior region.  A short
    adaptive synthetic-likelihood chain (finite almost everywhere, unlike
    the EL kernel), started at the median of the regression-adjusted draws
    of the last round, then sets the proposal scales to 2.38/sqrt(p) times
    its standard deviations.  The chain starts from the latest pilot state
    at which ``kernel`` is finite.
    """
    n = cfg.n or model.default_n
    per_round = max(100, cfg.pilot_draws // rounds)
    keep = max(20, per_round // 20)
    lower, upper = None, None
    for r in range(rounds):
        abc = rejection_abc(
            model, s_obs, n_total=per_round, seed=_pilot_seed(cfg.seed, r), keep=keep, n=n,
            lower=lower, upper=upper, adjust=False,
        )
        pad = 0.1 * (abc.theta.max(axis=0) - abc.theta.min(axis=0))
        lower = np.maximum(abc.theta.min(axis=0) - pad, model.lower)
        upper = np.minimum(abc.theta.max(axis=0) + pad, model.upper)

    floor = 1e-4 * (model.upper - model.lower)
    # The median of the regression-adjusted draws is a far better starting
    # point than the closest raw draw, which can sit in a spurious mode.
    start, spread = abc.theta[0], abc.theta.std(axis=0)
    try:
        adjusted = regression_adjust(abc, s_obs)
    except SingularDesign:
        adjusted = None
    if adjusted is not None and model.in_support(np.median(adjusted, axis=0)):
        start, spread = np.median(adjusted, axis=0), adjusted.std(axis=0)
    m = max(cfg.m or model.default_m, len(s_obs) + 2)
    synth = make_kernel(model, s_obs, EstimatorConfig(m=m, kind=SYNTHETIC), n)
    pilot = rwm_sample(
        synth,
        start,
        RWMConfig(cfg.pilot_iterations, cfg.pilot_iterations, tuple(np.maximum(0.5 * spread, floor))),
        seed=cfg.seed,
        chain_id=_PILOT_CHAIN,
        prior_sampler=model.sample_prior,
    )
    sd = pilot.draws.std(axis=0)
    scale = np.maximum(np.where(sd > 0, 2.38 / np.sqrt(model.dim) * sd, pilot.proposal_scale), floor)

    # Latest pilot states first, then the kept ABC draws, each tried a few
    # times since the EL kernel is random and can be zero by chance.
    candidates = np.vstack([pilot.draws[::-1][:: max(1, len(pilot.draws) // 200)], abc.theta])
    j = 0
    for _ in range(_START_TRIES):
        for theta in candidates:
            j += 1
            if np.isfinite(kernel(theta, substream(cfg.seed, _PILOT_STREAM, j))):
                return theta.copy(), scale
    raise InitializationError(
        f"EL kernel was zero at all {j} pilot candidates; the observed summaries may lie outside "
        "the range the model produces with this m (try more replicates or other summaries)"
    )


def _pilot_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(_PILOT_STREAM, r)).generate_state(1)[0])


def sample_posterior(cfg: RunConfig, x_obs=None) -> tuple[Chain, dict]:
    """Run one MCMC chain (EL or synthetic likelihood) for ``cfg``."""
    model = build_model(cfg)
    x_obs = observed_data(cfg, model) if x_obs is None else x_obs
    s_obs = model.summarize(x_obs)
    n = cfg.n or model.default_n
    est = EstimatorConfig(m=cfg.m or model.default_m, kind=cfg.method)
    kernel = make_kernel(model, s_obs, est, n)
    if cfg.init is not None and cfg.proposal_scale is not None:
        init, scale = np.asarray(cfg.init, dtype=float), np.asarray(cfg.proposal_scale, dtype=float)
    else:
        init, scale = pilot_start(model, kernel, s_obs, cfg)
        if cfg.init is not None:
            init = np.asarray(cfg.init, dtype=float)
        if cfg.proposal_scale is not None:
            scale = np.asarray(cfg.proposal_scale, dtype=float)
    chain = rwm_sample(
        kernel,
        init,
        RWMConfig(cfg.iterations, cfg.burnin, tuple(scale), adapt=cfg.adapt),
        seed=cfg.seed,
        prior_sampler=model.sample_prior,
        param_names=model.param_names,
    )
    info = {"s_obs": [float(v) for v in s_obs], "summary_labels": list(model.summary_spec.labels)}
    return chain, info


def run_inference(cfg: RunConfig) -> dict:
    """Run ``cfg`` and write chain.csv, summary.json, manifest.json and timing.json."""
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    model = build_model(cfg)
    x_obs = observed_data(cfg, model)
    if cfg.method == REJECTION_ABC:
        s_obs = model.summarize(x_obs)
        lower = upper = None
        if cfg.abc_restricted_prior and "abc_lower" in model.extra:
            lower, upper = model.extra["abc_lower"], model.extra["abc_upper"]
        result = rejection_abc(
            model, s_obs, n_total=cfg.abc_n_total, seed=cfg.seed, keep=cfg.abc_keep,
            n=cfg.n or model.default_n, lower=lower, upper=upper,
        )
        result.write_csv(out / "chain.csv")
        draws = result.adjusted if result.adjusted is not None else result.theta
        summary = {
            "posterior": posterior_summary(draws, model.param_names),
            "tolerance": result.tolerance,
            "n_keep": result.n_keep,
            "n_total": result.n_total,
            "s_obs": [float(v) for v in s_obs],
        }
    else:
        chain, info = sample_posterior(cfg, x_obs)
        chain.write_csv(out / "chain.csv")
        summary = {
            "posterior": posterior_summary(chain.draws, model.param_names),
            "acceptance_rate": chain.acceptance_rate,
            "proposal_scale": [float(v) for v in chain.proposal_scale],
            **info,
        }
    summary.update({"example": cfg.example, "method": cfg.method})
    write_json(out / "summary.json", summary)
    write_manifest(out, cfg)
    write_json(out / "timing.json", {"wall_time_seconds": time.perf_counter() - started})
    return summary


def write_manifest(out: Path, cfg) -> None:
    write_json(
        out / "manifest.json",
        {"config": cfg.to_dict(), "config_hash": config_hash(cfg), "seed": cfg.seed, "version": version_string()},
    )


# -- coverage study ------------------------------------------------------------------


@dataclass
class CoverageRow:
    label: str
    coverage: float
    average_length: float
    # replicates whose EL chain could not start; counted as not covering
    undefined: int = 0


@dataclass
class CoverageReport:
    rows: list
    replicates: int
    nominal: float = 0.95
    truth: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "replicates": self.replicates,
            "nominal": self.nominal,
            "truth": self.truth,
        }


@dataclass(frozen=True)
class CoverageConfig:
    base: RunConfig
    constraint_sets: tuple  # ((label, summaries-json), ...)
    replicates: int = 100
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "CoverageConfig":
        d = dict(d)
        sets = d.pop("constraint_sets", None)
        replicates = d.pop("replicates", 100)
        workers = d.pop("workers", 1)
        if not sets:
            raise ValidationError("coverage study needs a non-empty 'constraint_sets' list of {label, summaries}")
        try:
            pairs = tuple((s["label"], s["summaries"]) for s in sets)
        except (KeyError, TypeError):
            raise ValidationError("each constraint set needs 'label' and 'summaries'") from None
        base = RunConfig.from_dict({"example": "normal", **d})
        if base.example != "normal":
            raise ValidationError("the coverage study is defined for the normal example only")
        if not isinstance(replicates, int) or replicates < 1:
            raise ValidationError(f"replicates must be a positive integer, got {replicates!r}")
        for label, summaries in pairs:
            dataclasses.replace(base, summaries=summaries).validate()
        return cls(base, pairs, replicates, workers)

    def to_dict(self) -> dict:
        return {
            **self.base.to_dict(),
            "constraint_sets": [{"label": a, "summaries": b} for a, b in self.constraint_sets],
            "replicates": self.replicates,
            "workers": self.workers,
        }


def _normal_chain_config(base: RunConfig, summaries, seed: int, x_obs) -> RunConfig:
    n = len(x_obs)
    # the normal posterior sd is about 1/sqrt(n); start at the shrunk sample mean
    return dataclasses.replace(
        base,
        summaries=summaries,
        seed=seed,
        init=[float(np.sum(x_obs) / (n + 1))],
        proposal_scale=base.proposal_scale or [2.4 / np.sqrt(n + 1)],
    )


def _coverage_replicate(args) -> list:
    base, sets, rep = args
    model = get_model("normal")
    n = base.n or model.default_n
    x_obs = model.simulate(model.true_theta, n, substream(base.seed, _DATA_STREAM, rep))
    out = []
    for k, (_, summaries) in enumerate(sets):
        cfg = _normal_chain_config(base, summaries, _replicate_seed(base.seed, rep, k), x_obs)
        try:
            chain, _ = sample_posterior(cfg, x_obs)
        except InitializationError:
            # EL posterior zero at every point tried: no interval, not covered
            out.append((np.nan, np.nan))
            continue
        lo, hi = np.quantile(chain.draws[:, 0], [0.025, 0.975])
        out.append((float(lo), float(hi)))
    return out


def _replicate_seed(seed: int, rep: int, k: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(rep, k)).generate_state(1)[0])


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def coverage_study(cfg: CoverageConfig) -> CoverageReport:
    """Frequentist coverage of 95% equal-tailed credible intervals for mu at mu = 0."""
    jobs = [(cfg.base, cfg.constraint_sets, rep) for rep in range(cfg.replicates)]
    intervals = _map(_coverage_replicate, jobs, cfg.workers)
    rows = []
    for k, (label, _) in enumerate(cfg.constraint_sets):
        ci = np.array([rep[k] for rep in intervals])
        defined = np.isfinite(ci[:, 0])
        covered = defined & (ci[:, 0] <= 0.0) & (ci[:, 1] >= 0.0)
        length = float(np.mean(ci[defined, 1] - ci[defined, 0])) if defined.any() else float("nan")
        rows.append(CoverageRow(label, float(covered.mean()), length, int(np.sum(~defined))))
    n = cfg.base.n or get_model("normal").default_n
    truth = {"coverage": 0.95, "average_length": float(2 * 1.959963984540054 / np.sqrt(n + 1))}
    return CoverageReport(rows, cfg.replicates, 0.95, truth)


def run_coverage(cfg: CoverageConfig) -> CoverageReport:
    out = Path(cfg.base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    report = coverage_study(cfg)
    with open(out / "coverage.csv", "w") as fh:
        fh.write("label,coverage,average_length,undefined\n")
        for row in report.rows:
            fh.write(f"{row.label},{row.coverage!r},{row.average_length!r},{row.undefined}\n")
        fh.write(f"truth,{report.truth['coverage']!r},{report.truth['average_length']!r},0\n")
    write_json(out / "coverage.json", report.to_dict())
    _write_manifest_dict(out, cfg.to_dict(), cfg.base.seed)
    write_json(out / "timing.json", {"wall_time_seconds": time.perf_counter() - started})
    return report


def _write_manifest_dict(out: Path, config: dict, seed: int) -> None:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    write_json(
        out / "manifest.json",
        {"config": config, "config_hash": hashlib.sha256(blob.encode()).hexdigest(), "seed": seed,
         "version": version_string()},
    )


# -- posterior concentration ------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationConfig:
    base: RunConfig
    n_list: tuple = (100, 400, 1600)
    slack: float = 1.15
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "ConcentrationConfig":
        d = dict(d)
        n_list = tuple(d.pop("n_list", (100, 400, 1600)))
        slack = d.pop("slack", 1.15)
        workers = d.pop("workers", 1)
        base = RunConfig.from_dict({"example": "normal", **d})
        if base.example != "normal" or base.method != EL:
            raise ValidationError("the concentration test uses the normal example with the el method")
        if not n_list or any(not isinstance(v, int) or v < 2 for v in n_list):
            raise ValidationError("n_list must be a non-empty list of integers >= 2")
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ValidationError("n_list must be strictly increasing")
        return cls(base, n_list, slack, workers)

    def to_dict(self) -> dict:
        return {**self.base.to_dict(), "n_list": list(self.n_list), "slack": self.slack, "workers": self.workers}


def _concentration_run(args) -> dict:
    base, idx, n = args
    model = get_model("normal")
    x_obs = model.simulate(model.true_theta, n, substream(base.seed, _DATA_STREAM, idx))
    cfg = _normal_chain_config(dataclasses.replace(base, n=n, proposal_scale=None), base.summaries, base.seed, x_obs)
    chain, _ = sample_posterior(cfg, x_obs)
    d = chain.draws[:, 0]
    return {
        "n": n,
        "posterior_mean": float(d.mean()),
        "posterior_sd": float(d.std(ddof=1)),
        "exact_sd": float(1.0 / np.sqrt(n + 1)),
        "acceptance_rate": chain.acceptance_rate,
    }


def concentration_test(cfg: ConcentrationConfig) -> dict:
    """Posterior sd and mean of mu across increasing n, with pass/fail checks."""
    rows = _map(_concentration_run, [(cfg.base, i, n) for i, n in enumerate(cfg.n_list)], cfg.workers)
    sds = [r["posterior_sd"] for r in rows]
    monotone = all(b < a * cfg.slack for a, b in zip(sds, sds[1:]))
    centred = all(abs(r["posterior_mean"]) < 3 * r["posterior_sd"] for r in rows)
    return {"rows": rows, "monotone_sd": monotone, "mean_within_3sd": centred, "passed": monotone and centred}


def run_concentration(cfg: ConcentrationConfig) -> dict:
    out = Path(cfg.base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    result = concentration_test(cfg)
    with open(out / "concentration.csv", "w") as fh:
        fh.write("n,posterior_mean,posterior_sd,exact_sd,acceptance_rate\n")
        for r in result["rows"]:
            fh.write(f"{r['n']},{r['posterior_mean']!r},{r['posterior_sd']!r},{r['exact_sd']!r},{r['acceptance_rate']!r}\n")
    write_json(out / "concentration.json", result)
    _write_manifest_dict(out, cfg.to_dict(), cfg.base.seed)
    write_json(out / "timing.json", {"wall_time_seconds": time.perf_counter() - started})
    return result


# -- density tables --------------------------------------------------------------------


class EmptyChain(ValueError):
    pass


def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return float(0.9 * spread * x.size ** -0.2)


def gaussian_kde(x, grid, bandwidth: float, chunk: int = 4096) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(len(grid))
    for start in range(0, x.size, chunk):
        u = (grid[:, None] - x[None, start : start + chunk]) / bandwidth
        out += np.exp(-0.5 * u * u).sum(axis=1)
    return out / (x.size * bandwidth * np.sqrt(2 * np.pi))


def density_table(draws, names, grid_size: int = 512) -> list[tuple[str, float, float]]:
    """Marginal Gaussian KDEs on grids spanning the draw range plus 3 bandwidths."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0 or len(draws) == 0:
        raise EmptyChain("chain has no draws")
    if grid_size < 2:
        raise ValueError("grid size must be at least 2")
    rows = []
    for j, name in enumerate(names):
        x = draws[:, j]
        h = silverman_bandwidth(x)
        if not h > 0:
            raise EmptyChain(f"draws of {name!r} are all identical; the density is a point mass")
        grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, grid_size)
        dens = gaussian_kde(x, grid, h)
        rows.extend((name, float(g), float(f)) for g, f in zip(grid, dens))
    return rows


def run_density(chain_path, grid_size: int = 512, output=None) -> Path:
    names, draws = read_chain_csv(chain_path)
    # for rejection-ABC files keep the adjusted columns only
    keep = [j for j, nm in enumerate(names) if not nm.startswith("raw_")]
    rows = density_table(draws[:, keep], [names[j] for j in keep], grid_size)
    output = Path(output) if output else Path(chain_path).with_name("density.csv")
    with open(output, "w") as fh:
        fh.write("coordinate,grid_point,density\n")
        for name, g, f in rows:
            fh.write(f"{name},{g!r},{f!r}\n")
    return output
