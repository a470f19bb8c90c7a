"""Acceptance suite: one test per numbered criterion, at the stated tolerances.

Each test records a PASS/FAIL line (collected in ``acceptance_log``) before
asserting, so the session summary lists every criterion even when some fail.
Run alone with ``pytest tests/test_acceptance.py -v``; the full suite takes
tens of minutes on one core.
"""

import time

import numpy as np
import pytest

from acceptance_log import record
from elabc.el import ELStatus, solve_el
from elabc.experiments import (
    ConcentrationConfig,
    CoverageConfig,
    RunConfig,
    concentration_test,
    density_table,
    run_concentration,
    run_coverage,
    run_density,
    run_inference,
    sample_posterior,
)
from elabc.models import STEREO_HARD_SUMMARIES, get_model, load_stereo_observed, simulate_arch1
from elabc.pseudolik import el_from_summaries, synth_from_summaries
from elabc.rng import substream
from elabc.samplers import InitializationError, fit_linear_adjustment, regression_adjust, rejection_abc
from oracles import grid_el_oracle, interior_margin, mvn_logpdf, normal_equations

pytestmark = pytest.mark.slow


def batch_means_se(x, batches=50):
    x = np.asarray(x, dtype=float)
    size = len(x) // batches
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def marginal_mode(draws):
    rows = density_table(np.asarray(draws, dtype=float)[:, None], ["x"], 1024)
    grid = np.array([r[1] for r in rows])
    dens = np.array([r[2] for r in rows])
    return float(grid[np.argmax(dens)])


# 1 -------------------------------------------------------------------------------


def test_criterion_1_el_matches_grid_oracle():
    rng = np.random.default_rng(20240101)
    started = time.perf_counter()
    worst, contradictions = 0.0, 0
    for _ in range(500):
        m, r = int(rng.integers(2, 7)), int(rng.integers(1, 3))
        H = rng.uniform(-2, 2, size=(m, r))
        sol = solve_el(H)
        oracle = grid_el_oracle(H)
        margin = interior_margin(H)
        if np.isfinite(oracle) != sol.feasible or (margin > 1e-9) != sol.feasible:
            contradictions += 1
            continue
        if sol.feasible:
            worst = max(worst, abs(sol.log_el - oracle))
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-3 and contradictions == 0 and elapsed < 60
    record(1, ok, f"max |logEL - oracle| = {worst:.2e}, verdict contradictions = {contradictions}, {elapsed:.1f}s")
    assert ok


# 2 -------------------------------------------------------------------------------


def test_criterion_2_dual_primal_identities():
    rng = np.random.default_rng(20240102)
    started = time.perf_counter()
    worst = np.zeros(3)
    solved = 0
    while solved < 10_000:
        m, r = int(rng.integers(2, 201)), int(rng.integers(1, 6))
        H = rng.standard_normal((m, r)) + rng.normal(scale=0.3, size=r)
        sol = solve_el(H)
        if sol.status is not ELStatus.INTERIOR:
            continue
        solved += 1
        w = sol.weights
        worst = np.maximum(worst, [
            abs(w.sum() - 1.0),
            np.max(np.abs(H.T @ w)),
            np.max(np.abs(w * m * (1.0 + H @ sol.multiplier) - 1.0)),
        ])
    elapsed = time.perf_counter() - started
    ok = worst[0] <= 1e-10 and worst[1] <= 1e-8 and worst[2] <= 1e-8 and elapsed < 60
    record(2, ok, f"simplex {worst[0]:.1e}, constraint {worst[1]:.1e}, dual-primal {worst[2]:.1e}, {elapsed:.1f}s")
    assert ok


# 3 -------------------------------------------------------------------------------


def test_criterion_3_normal_posterior_oracle():
    model = get_model("normal")
    passing = 0
    for seed in range(20):
        x = model.simulate(model.true_theta, 100, substream(seed, 2))
        exact_mean, exact_sd = x.sum() / 101, 1 / np.sqrt(101)
        cfg = RunConfig(example="normal", iterations=10_000, burnin=10_000, seed=seed,
                        init=[float(exact_mean)], proposal_scale=[2.4 / np.sqrt(101)])
        chain, _ = sample_posterior(cfg, x)
        d = chain.draws[:, 0]
        se = batch_means_se(d)
        ok = abs(d.mean() - exact_mean) <= 3 * se and abs(d.std(ddof=1) - exact_sd) <= 0.25 * exact_sd
        passing += ok
    ok = passing >= 18
    record(3, ok, f"{passing}/20 seeds within 3 MC s.e. of sum(x)/(n+1) and sd within 25%")
    assert ok


# 4 -------------------------------------------------------------------------------

COVERAGE_SETS = [
    {"label": "mean", "summaries": [{"kind": "raw_moment", "order": 1}]},
    {"label": "median", "summaries": [{"kind": "quantile", "level": 0.5}]},
    {"label": "mean+median", "summaries": [{"kind": "raw_moment", "order": 1}, {"kind": "quantile", "level": 0.5}]},
    {"label": "four moments", "summaries": [{"kind": "raw_moment", "order": k} for k in (1, 2, 3, 4)]},
]


def test_criterion_4_coverage_table(tmp_path):
    cfg = CoverageConfig.from_dict({
        "iterations": 4000, "burnin": 1000, "seed": 2018, "replicates": 100,
        "output_dir": str(tmp_path), "constraint_sets": COVERAGE_SETS,
    })
    report = run_coverage(cfg)
    rows = {r.label: r for r in report.rows}
    mean, median = rows["mean"], rows["median"]
    checks = [
        0.85 <= mean.coverage <= 0.99,
        0.27 <= mean.average_length <= 0.41,
        0.85 <= median.coverage <= 0.99,
        0.34 <= median.average_length <= 0.52,
        rows["mean+median"].coverage < mean.coverage,
        rows["four moments"].coverage < mean.coverage,
    ]
    table = ", ".join(f"{r.label} {r.coverage:.2f}/{r.average_length:.3f}" for r in report.rows)
    record(4, all(checks), f"coverage/length: {table}; truth length {report.truth['average_length']:.3f}")
    assert all(checks)


# 5 -------------------------------------------------------------------------------


def test_criterion_5_synthetic_likelihood_oracle():
    rng = np.random.default_rng(20240105)
    worst, compared = 0.0, 0
    for _ in range(1000):
        r = int(rng.integers(1, 6))
        m = r + 2 + int(rng.integers(0, 40))
        # well-conditioned random covariances; with condition numbers near the
        # 1e12 cut-off no float64 implementation reaches 1e-10 absolute
        S = rng.standard_normal((m, r)) * rng.uniform(0.5, 2.0, size=r) + rng.normal(size=r)
        s_obs = rng.normal(size=r) * 2
        est = synth_from_summaries(S, s_obs)
        assert not est.is_zero
        oracle = mvn_logpdf(s_obs, S.mean(axis=0), np.atleast_2d(np.cov(S, rowvar=False, ddof=1)))
        worst = max(worst, abs(est.log_value - oracle))
        compared += 1
    ok = worst <= 1e-10
    record(5, ok, f"max |synthetic - dense MVN| = {worst:.1e} over {compared} instances")
    assert ok


# 6 -------------------------------------------------------------------------------


class _Kept:
    def __init__(self, theta, summaries):
        self.theta, self.summaries = theta, summaries


def test_criterion_6_regression_adjustment():
    rng = np.random.default_rng(20240106)
    worst = 0.0
    for _ in range(200):
        r, p = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        N = 20 + int(rng.integers(0, 200))
        S = rng.normal(size=(N, r))
        theta = rng.normal(size=(N, p)) + S @ rng.normal(size=(r, p))
        s_obs = rng.normal(size=r)
        a, B = fit_linear_adjustment(theta, S, s_obs)
        coef = normal_equations(S - s_obs, theta)
        worst = max(worst, np.max(np.abs(a - coef[0])), np.max(np.abs(B - coef[1:])))
    s_obs = np.array([0.5, -1.0])
    theta = rng.normal(size=(30, 2))
    identity = np.array_equal(regression_adjust(_Kept(theta, np.tile(s_obs, (30, 1))), s_obs), theta)
    S = rng.normal(size=(30, 2))
    linear = (2.0 + S @ np.array([1.5, -0.5]))[:, None]
    adj = regression_adjust(_Kept(linear, S), s_obs)
    collapse = np.ptp(adj) == 0.0 or np.max(np.abs(adj - (2.0 + s_obs @ np.array([1.5, -0.5])))) < 1e-12
    ok = worst <= 1e-8 and identity and collapse
    record(6, ok, f"max coefficient error {worst:.1e}; zero-regressor identity {identity}; perfect-fit collapse {collapse}")
    assert ok


# 7 -------------------------------------------------------------------------------


def test_criterion_7_gk_desk_run():
    cfg = RunConfig(example="gk", method="el", iterations=20_000, burnin=20_000, seed=7)
    chain, _ = sample_posterior(cfg)
    means = chain.draws.mean(axis=0)
    err = np.abs(means - np.array([3.0, 1.0, 2.0, 0.5]))
    ok = bool(np.all(err[:3] <= 0.3) and err[3] <= 0.15)
    record(7, ok, f"posterior means (A,B,g,k) = {np.round(means, 3).tolist()}, acceptance {chain.acceptance_rate:.3f}")
    assert ok


# 8 -------------------------------------------------------------------------------


def test_criterion_8_arch_desk_runs():
    x = simulate_arch1((3.0, 0.75), 10**6, substream(8))
    variance_ok = abs(x.var() - 12.0) <= 0.5
    el_means, sl_alpha1, undefined = [], [], []
    for seed in range(10):
        base = dict(example="arch1", iterations=5000, burnin=5000, seed=seed)
        try:
            el, _ = sample_posterior(RunConfig(method="el", **base))
            el_means.append(el.draws.mean(axis=0))
        except InitializationError:
            # the EL posterior is zero wherever the pilot looked; counts as a loss
            el_means.append([np.nan, np.nan])
            undefined.append(seed)
        sl, _ = sample_posterior(RunConfig(method="synthetic", **base))
        sl_alpha1.append(sl.draws[:, 1].mean())
    el_means, sl_alpha1 = np.array(el_means), np.array(sl_alpha1)
    first = el_means[0]
    location_ok = abs(first[0] - 3.0) <= 0.6 and abs(first[1] - 0.75) <= 0.12
    wins = int(np.sum(np.abs(el_means[:, 1] - 0.75) < np.abs(sl_alpha1 - 0.75)))
    ok = variance_ok and location_ok and wins >= 7
    record(8, ok,
           f"variance {x.var():.2f}; EL means seed 0 {np.round(first, 3).tolist()}; "
           f"EL alpha1 {np.round(el_means[:, 1], 3).tolist()}; SL alpha1 {np.round(sl_alpha1, 3).tolist()}; "
           f"EL closer in {wins}/10; EL undefined for seeds {undefined}")
    assert ok


# 9 -------------------------------------------------------------------------------


def test_criterion_9_stereology():
    base = dict(example="stereo", iterations=5000, burnin=5000, seed=9)
    el, _ = sample_posterior(RunConfig(method="el", **base))
    sl, _ = sample_posterior(RunConfig(method="synthetic", **base))
    model = get_model("stereo")
    s_obs = model.summarize(load_stereo_observed())
    abc = rejection_abc(model, s_obs, n_total=50_000, seed=9, keep=500)
    abc_draws = abc.adjusted if abc.adjusted is not None else abc.theta
    modes = {
        "el": marginal_mode(el.draws[:, 0]),
        "synthetic": marginal_mode(sl.draws[:, 0]),
        "rejection-abc": marginal_mode(abc_draws[:, 0]),
    }
    vals = list(modes.values())
    agree = all(abs(a - b) <= 0.25 * min(a, b) for i, a in enumerate(vals) for b in vals[i + 1:])

    hard = model.with_summaries(STEREO_HARD_SUMMARIES)
    s_hard = hard.summarize(load_stereo_observed())
    rng = substream(9, 4)
    zero = 0
    draws = 200
    for j in range(draws):
        theta = hard.sample_prior(rng)
        S = hard.summarize_many(hard.simulate_many(theta, None, 25, substream(9, 5, j)))
        zero += el_from_summaries(S, s_hard).is_zero
    infeasible = zero / draws
    ok = agree and infeasible > 0.5
    record(9, ok, f"lambda modes {', '.join(f'{k} {v:.1f}' for k, v in modes.items())}; "
                  f"hard summaries infeasible at {infeasible:.0%} of prior draws")
    assert ok


# 10 ------------------------------------------------------------------------------


def test_criterion_10_concentration():
    result = concentration_test(ConcentrationConfig.from_dict({"seed": 10, "iterations": 10_000, "burnin": 5000}))
    sds = [round(r["posterior_sd"], 4) for r in result["rows"]]
    ok = result["monotone_sd"]
    record(10, ok, f"posterior sd at n=100,400,1600: {sds}; means within 3 sd {result['mean_within_3sd']}")
    assert ok


# 11 ------------------------------------------------------------------------------


def _bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "timing.json"}


def test_criterion_11_determinism(tmp_path):
    jobs = {
        "normal-el": lambda out: run_inference(RunConfig(example="normal", iterations=500, burnin=200, seed=1,
                                                         output_dir=str(out), pilot_draws=400, pilot_iterations=200)),
        "gk-synthetic": lambda out: run_inference(RunConfig(example="gk", method="synthetic", iterations=200, burnin=100,
                                                            seed=2, output_dir=str(out), pilot_draws=400,
                                                            pilot_iterations=100)),
        "arch-abc": lambda out: run_inference(RunConfig(example="arch1", method="rejection-abc", abc_n_total=2000,
                                                        abc_keep=50, seed=3, output_dir=str(out))),
        "coverage": lambda out: run_coverage(CoverageConfig.from_dict({
            "iterations": 200, "burnin": 50, "replicates": 3, "seed": 4, "output_dir": str(out),
            "constraint_sets": COVERAGE_SETS[:2]})),
        "concentration": lambda out: run_concentration(ConcentrationConfig.from_dict({
            "iterations": 200, "burnin": 50, "seed": 5, "output_dir": str(out), "n_list": [50, 200]})),
    }
    differing = []
    for name, job in jobs.items():
        out = tmp_path / name
        snapshots = []
        for _ in range(2):
            job(out)
            if (out / "chain.csv").exists():
                run_density(out / "chain.csv", 64)
            snapshots.append(_bytes(out))
        if snapshots[0] != snapshots[1]:
            differing.append(name)
    ok = not differing
    record(11, ok, f"{len(jobs)} run types repeated; differing outputs: {differing or 'none'}")
    assert ok
