"""Reproducible Monte Carlo harness for the six risk experiments.

Protocol
--------
Per experiment, the signal pair is frozen once from the ``signal`` stream of
the master seed: a sparse ``beta_star`` (10% nonzero by default) and a
misalignment direction ``delta`` uniform on the sphere of radius
``delta_norm``, giving the transfer center ``beta0 = beta_star + delta``.
Each replication draws a fresh design and a fresh unit-scale noise vector
from per-replication streams, so any subset of replications can run on any
worker without changing a single byte of output.

Noise delivery: squared-loss estimators receive the winsorized noise (clamped
at the sample-size-coupled threshold, scaled exactly equivariantly along the
sweep); the Huber estimator receives the raw heavy-tailed noise.  On the
noise-variance sweep the winsorized draw is rescaled so its population
variance is exactly the target value.

Outputs: sorted risk-record CSVs (one row per estimator/sweep/replication),
a JSON summary with per-group statistics and built-in pass/fail checks, and
an echo of the fully resolved configuration.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .convex import Loss, LossKind, RegKind, Regularizer
from .errors import ConfigError
from .estimators import EstimatorConfig, LambdaMode, empirical_risk, fit_proximal
from .spectrum import (
    CovarianceModel,
    DiscreteSpectrum,
    decompose,
    project_delta,
    q_sigma,
    sample_design,
    sample_signal,
    sample_sphere,
)
from .streams import substream
from .tails import NoiseFamily, TailLaw, effective_variance_exact, sample_noise, winsorize

__all__ = [
    "ExperimentConfig",
    "RiskRecord",
    "ExperimentResult",
    "default_config",
    "run_experiment",
    "run_paradox",
    "run_floor",
    "run_transient",
    "run_trichotomy",
    "run_universality",
    "run_concentration",
    "summarize",
    "write_outputs",
    "CSV_HEADER",
    "EXPERIMENT_NAMES",
]

CSV_HEADER = ("experiment", "estimator", "sweep_value", "replication", "risk", "converged", "wall_ms")
EXPERIMENT_NAMES = ("paradox", "floor", "transient", "trichotomy", "universality", "concentration")

_NOISELESS_PENALTY = 1.0e-12  # penalty floor for scale-zero rows
_MAX_NONCONVERGED_FRACTION = 0.01
_SLOPE_BAND_SQUARED = (1.8, 2.2)
_SLOPE_BAND_FLAT = (-0.1, 0.1)
_PLATEAU_RTOL = 0.15
_FLOOR_GAP_RTOL = 0.10
_CONCENTRATION_BAND = (0.9, 1.1)


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, serializable description of one experiment run."""

    name: str
    n: int = 800
    p: int = 400
    cov: CovarianceModel = None  # type: ignore[assignment]  # filled in __post_init__
    noise: TailLaw = TailLaw(NoiseFamily.STUDENT_T, alpha=1.5)
    sparsity: float = 0.1
    delta_norm: float = 1.0
    lambda_tilde: float = 1.0
    lambda_fixed: float = 0.1
    huber_k: float = 1.5
    scale_grid: tuple[float, ...] | None = None
    sigma_grid: tuple[float, ...] | None = None
    n_grid: tuple[int, ...] | None = None
    replications: int = 100
    master_seed: int = 12345
    design_kind: str = "gaussian"
    workers: int = 1
    paper_scale: bool = False

    def __post_init__(self) -> None:
        if self.name not in EXPERIMENT_NAMES:
            raise ConfigError(f"unknown experiment {self.name!r}; expected one of {EXPERIMENT_NAMES}")
        if self.cov is None:
            object.__setattr__(self, "cov", CovarianceModel.ar1(self.p, 0.5))
        if self.cov.p != self.p:
            raise ConfigError(f"covariance dimension {self.cov.p} does not match p={self.p}")
        if self.n < 1 or self.p < 1:
            raise ConfigError(f"dimensions must be >= 1, got n={self.n}, p={self.p}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.master_seed < 0:
            raise ConfigError(f"master seed must be >= 0, got {self.master_seed}")
        if self.design_kind not in ("gaussian", "rademacher"):
            raise ConfigError(f"unknown design kind {self.design_kind!r}")
        if self.name == "concentration":
            if self.noise.scale == 0.0:
                raise ConfigError("the winsorized-energy ratio is undefined for a zero-scale noise law")
        elif self.noise.scale != 1.0:
            raise ConfigError("sweeps own the noise scale; configure the law with scale=1")
        for label in ("scale_grid", "sigma_grid", "n_grid"):
            grid = getattr(self, label)
            if grid is not None:
                if len(grid) == 0:
                    raise ConfigError(f"{label} must be nonempty")
                if any(b <= a for a, b in zip(grid, grid[1:])):
                    raise ConfigError(f"{label} must be strictly ascending")
        needs = {"transient": "sigma_grid", "concentration": "n_grid"}.get(self.name, "scale_grid")
        if getattr(self, needs) is None:
            raise ConfigError(f"experiment {self.name!r} requires {needs}")
        if not (self.lambda_tilde > 0.0 and self.lambda_fixed > 0.0 and self.huber_k > 0.0):
            raise ConfigError("penalty weights and the Huber knee must be > 0")

    @property
    def gamma(self) -> float:
        return self.p / self.n

    def to_dict(self) -> dict:
        """JSON-ready fully resolved configuration."""
        out = dataclasses.asdict(self)
        out["cov"] = {"kind": self.cov.kind.value, "p": self.cov.p, "rho": self.cov.rho}
        out["noise"] = {"family": self.noise.family.value, "alpha": self.noise.alpha, "scale": self.noise.scale}
        out["gamma"] = self.gamma
        for label in ("scale_grid", "sigma_grid"):
            if out[label] is not None:
                out[label] = [float(v) for v in out[label]]
        if out["n_grid"] is not None:
            out["n_grid"] = [int(v) for v in out["n_grid"]]
        return out


@dataclass(frozen=True)
class RiskRecord:
    """One Monte Carlo measurement."""

    experiment: str
    estimator: str
    sweep_value: float
    replication: int
    risk: float
    converged: bool
    wall_ms: float


@dataclass(frozen=True)
class ExperimentResult:
    """Records plus the summary with built-in pass/fail checks."""

    config: ExperimentConfig
    records: tuple[RiskRecord, ...]
    summary: dict

    @property
    def passed(self) -> bool:
        return bool(self.summary["passed"])


def _desk_scale_grid() -> tuple[float, ...]:
    return (0.0,) + tuple(float(s) for s in np.geomspace(1.0, 1.0e3, 10))


def _trichotomy_scale_grid() -> tuple[float, ...]:
    # The robust-loss plateau is approached at rate scale**-(2-alpha), so the
    # flatness read-off needs a top decade two decades beyond the divergence
    # sweep; 11 points at half-decade spacing reach 1e5.
    return (0.0,) + tuple(float(s) for s in np.geomspace(1.0, 1.0e5, 11))


def default_config(name: str, master_seed: int = 12345, paper_scale: bool = False, workers: int = 1) -> ExperimentConfig:
    """Desk-scale defaults per experiment; ``paper_scale`` switches to the
    long-run protocol (n=2000, p=1000, 500 replications)."""
    n, p, reps = (2000, 1000, 500) if paper_scale else (800, 400, 100)
    common = dict(n=n, p=p, cov=CovarianceModel.ar1(p, 0.5), master_seed=master_seed,
                  workers=workers, paper_scale=paper_scale)
    if name in ("paradox", "floor"):
        return ExperimentConfig(name=name, scale_grid=_desk_scale_grid(), replications=reps, **common)
    if name == "trichotomy":
        return ExperimentConfig(name=name, scale_grid=_trichotomy_scale_grid(), replications=reps, **common)
    if name == "transient":
        points = 25 if paper_scale else 10
        reps_t = 500 if paper_scale else 200
        grid = tuple(float(v) for v in np.geomspace(1.0, 1.0e4, points))
        return ExperimentConfig(name=name, sigma_grid=grid, replications=reps_t, **common)
    if name == "universality":
        grid = tuple(float(v) for v in np.geomspace(1.0, 1.0e3, 5))
        return ExperimentConfig(name=name, scale_grid=grid, replications=100 if not paper_scale else reps, **common)
    if name == "concentration":
        return ExperimentConfig(
            name=name,
            n=800,
            p=400,
            cov=CovarianceModel.ar1(400, 0.5),
            noise=TailLaw(NoiseFamily.SYMMETRIC_PARETO, alpha=1.5),
            n_grid=(10 ** 3, 10 ** 4, 10 ** 5),
            replications=200,
            master_seed=master_seed,
            workers=workers,
            paper_scale=paper_scale,
        )
    raise ConfigError(f"unknown experiment {name!r}; expected one of {EXPERIMENT_NAMES}")


# --------------------------------------------------------------------------
# Frozen per-experiment state shared across replications and workers.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Plan:
    config: ExperimentConfig
    spec: DiscreteSpectrum  # carries the misalignment projection
    beta_star: np.ndarray
    beta0: np.ndarray
    tau_unit: float
    sigma2_unit: float


def _build_plan(config: ExperimentConfig) -> _Plan:
    spec = decompose(config.cov)
    rng = substream(config.master_seed, "signal", 0)
    beta_star = sample_signal(config.p, config.sparsity, rng)
    delta = sample_sphere(config.p, config.delta_norm, rng)
    beta0 = beta_star + delta
    spec = project_delta(spec, beta_star, beta0)
    tau_unit = float(config.n) ** (1.0 / config.noise.alpha)
    sigma2_unit = effective_variance_exact(config.noise, tau_unit)
    return _Plan(config=config, spec=spec, beta_star=beta_star, beta0=beta0,
                 tau_unit=tau_unit, sigma2_unit=sigma2_unit)


@dataclass(frozen=True)
class _RepDraw:
    """One replication's design (eigendecomposed once) and unit noise."""

    evals: np.ndarray
    evecs: np.ndarray
    x: np.ndarray
    w_unit: np.ndarray
    w_wins_unit: np.ndarray


def _draw_replication(plan: _Plan, rep: int, design_kind: str | None = None) -> _RepDraw:
    cfg = plan.config
    kind = cfg.design_kind if design_kind is None else design_kind
    x = sample_design(plan.spec, cfg.n, substream(cfg.master_seed, "design", rep), kind=kind)
    w_unit = sample_noise(cfg.noise, cfg.n, substream(cfg.master_seed, "noise", rep))
    gram = x.T @ x / cfg.n
    evals, evecs = np.linalg.eigh(gram)
    return _RepDraw(evals=evals, evecs=evecs, x=x, w_unit=w_unit,
                    w_wins_unit=winsorize(w_unit, plan.tau_unit))


def _resolvent_solve(draw: _RepDraw, rhs: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(X'X/n + lam I) d = rhs`` through the cached eigenbasis."""
    return draw.evecs @ ((draw.evecs.T @ rhs) / (draw.evals + lam))


def _linear_fit(plan: _Plan, draw: _RepDraw, estimator: str, scale: float) -> tuple[np.ndarray, float]:
    """Closed-form fit of one squared-loss estimator at one noise scale.

    Returns the coefficient estimate and the effective penalty used.
    """
    cfg = plan.config
    xtw = draw.x.T @ (scale * draw.w_wins_unit) / cfg.n
    if estimator == "ols":
        return plan.beta_star + _resolvent_solve(draw, xtw, 0.0), 0.0
    if estimator == "fixed_ridge":
        lam = cfg.lambda_fixed
        gram_beta = draw.evecs @ ((draw.evecs.T @ plan.beta_star) * draw.evals)
        return _resolvent_solve(draw, gram_beta + xtw, lam), lam
    if estimator == "transfer_ridge":
        sigma2 = scale ** 2 * plan.sigma2_unit
        lam = max(cfg.lambda_tilde * sigma2, _NOISELESS_PENALTY)
        diff = plan.beta_star - plan.beta0
        gram_diff = draw.evecs @ ((draw.evecs.T @ diff) * draw.evals)
        return plan.beta0 + _resolvent_solve(draw, gram_diff + xtw, lam), lam
    raise ConfigError(f"unknown linear estimator {estimator!r}")


def _record(plan: _Plan, estimator: str, sweep: float, rep: int, beta_hat: np.ndarray,
            converged: bool, t0: float) -> RiskRecord:
    risk = empirical_risk(beta_hat, plan.beta_star, plan.spec.matrix)
    return RiskRecord(
        experiment=plan.config.name,
        estimator=estimator,
        sweep_value=float(sweep),
        replication=rep,
        risk=risk,
        converged=converged,
        wall_ms=(time.perf_counter() - t0) * 1.0e3,
    )


# --------------------------------------------------------------------------
# Per-replication record generators (module-level so worker processes can
# import them; the plan is installed per worker by the pool initializer).
# --------------------------------------------------------------------------

_WORKER_PLAN: _Plan | None = None


def _install_plan(plan: _Plan) -> None:
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _worker_entry(rep: int) -> list[RiskRecord]:
    return _records_for_replication(_WORKER_PLAN, rep)


def _records_for_replication(plan: _Plan, rep: int) -> list[RiskRecord]:
    name = plan.config.name
    if name == "paradox":
        return _rep_paradox(plan, rep)
    if name == "floor":
        return _rep_floor(plan, rep)
    if name == "transient":
        return _rep_transient(plan, rep)
    if name == "trichotomy":
        return _rep_trichotomy(plan, rep)
    if name == "universality":
        return _rep_universality(plan, rep)
    if name == "concentration":
        return _rep_concentration(plan, rep)
    raise ConfigError(f"unknown experiment {name!r}")


def _rep_paradox(plan: _Plan, rep: int) -> list[RiskRecord]:
    draw = _draw_replication(plan, rep)
    records = []
    for scale in plan.config.scale_grid:
        for estimator in ("ols", "fixed_ridge", "transfer_ridge"):
            t0 = time.perf_counter()
            beta_hat, _ = _linear_fit(plan, draw, estimator, scale)
            records.append(_record(plan, estimator, scale, rep, beta_hat, True, t0))
    return records


def _rep_floor(plan: _Plan, rep: int) -> list[RiskRecord]:
    cfg = plan.config
    draw = _draw_replication(plan, rep)
    records = []
    warm = None
    for scale in cfg.scale_grid:
        t0 = time.perf_counter()
        beta_hat, _ = _linear_fit(plan, draw, "transfer_ridge", scale)
        records.append(_record(plan, "transfer_ridge", scale, rep, beta_hat, True, t0))

        t0 = time.perf_counter()
        sigma2 = scale ** 2 * plan.sigma2_unit
        lam = max(cfg.lambda_tilde * sigma2, _NOISELESS_PENALTY)
        lasso = EstimatorConfig(Loss(LossKind.SQUARED), Regularizer(RegKind.LASSO),
                                LambdaMode.FIXED, lam, center=plan.beta0)
        y = draw.x @ plan.beta_star + scale * draw.w_wins_unit
        fit = fit_proximal(lasso, draw.x, y, x0=warm)
        warm = fit.beta_hat
        records.append(_record(plan, "transfer_lasso", scale, rep, fit.beta_hat, fit.converged, t0))
    return records


def _rep_transient(plan: _Plan, rep: int) -> list[RiskRecord]:
    cfg = plan.config
    draw = _draw_replication(plan, rep)
    diff = plan.beta_star - plan.beta0
    gram_diff = draw.evecs @ ((draw.evecs.T @ diff) * draw.evals)
    xtw_unit = draw.x.T @ draw.w_wins_unit / cfg.n
    records = []
    for sigma2 in cfg.sigma_grid:
        t0 = time.perf_counter()
        amp = math.sqrt(sigma2 / plan.sigma2_unit)
        beta_hat = plan.beta0 + _resolvent_solve(draw, gram_diff + amp * xtw_unit, cfg.lambda_tilde * sigma2)
        records.append(_record(plan, "transfer_ridge", sigma2, rep, beta_hat, True, t0))
    return records


def _rep_trichotomy(plan: _Plan, rep: int) -> list[RiskRecord]:
    cfg = plan.config
    draw = _draw_replication(plan, rep)
    records = []
    huber = EstimatorConfig(Loss(LossKind.HUBER, cfg.huber_k), Regularizer(RegKind.RIDGE),
                            LambdaMode.FIXED, cfg.lambda_fixed)
    warm = None
    signal = draw.x @ plan.beta_star
    for scale in cfg.scale_grid:
        for estimator in ("ols", "fixed_ridge", "transfer_ridge"):
            t0 = time.perf_counter()
            beta_hat, _ = _linear_fit(plan, draw, estimator, scale)
            records.append(_record(plan, estimator, scale, rep, beta_hat, True, t0))
        t0 = time.perf_counter()
        y_raw = signal + scale * draw.w_unit
        fit = fit_proximal(huber, draw.x, y_raw, x0=warm)
        warm = fit.beta_hat
        records.append(_record(plan, "huber", scale, rep, fit.beta_hat, fit.converged, t0))
    return records


def _rep_universality(plan: _Plan, rep: int) -> list[RiskRecord]:
    cfg = plan.config
    records = []
    for kind in ("gaussian", "rademacher"):
        draw = _draw_replication(plan, rep, design_kind=kind)
        for scale in cfg.scale_grid:
            t0 = time.perf_counter()
            beta_hat, _ = _linear_fit(plan, draw, "transfer_ridge", scale)
            records.append(_record(plan, f"transfer_ridge_{kind}", scale, rep, beta_hat, True, t0))
    return records


def _rep_concentration(plan: _Plan, rep: int) -> list[RiskRecord]:
    cfg = plan.config
    rng = substream(cfg.master_seed, "noise", rep)
    records = []
    for n in cfg.n_grid:  # ascending; one stream consumed sequentially
        t0 = time.perf_counter()
        tau = float(n) ** (1.0 / cfg.noise.alpha)
        w = sample_noise(cfg.noise, n, rng)
        ratio = float(np.sum(winsorize(w, tau) ** 2)) / (n * effective_variance_exact(cfg.noise, tau))
        records.append(RiskRecord(
            experiment=cfg.name,
            estimator="winsorized_energy_ratio",
            sweep_value=float(n),
            replication=rep,
            risk=ratio,
            converged=True,
            wall_ms=(time.perf_counter() - t0) * 1.0e3,
        ))
    return records


# --------------------------------------------------------------------------
# Execution, aggregation, checks.
# --------------------------------------------------------------------------


def _collect_records(plan: _Plan) -> tuple[RiskRecord, ...]:
    cfg = plan.config
    reps = range(cfg.replications)
    if cfg.workers == 1:
        chunks = [_records_for_replication(plan, rep) for rep in reps]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_install_plan, initargs=(plan,)) as pool:
            chunks = list(pool.map(_worker_entry, reps, chunksize=4))
    records = [record for chunk in chunks for record in chunk]
    records.sort(key=lambda r: (r.estimator, r.sweep_value, r.replication))
    return tuple(records)


def summarize(records: tuple[RiskRecord, ...]) -> dict:
    """Deterministic per-(estimator, sweep) statistics."""
    groups: dict[tuple[str, float], list[RiskRecord]] = {}
    for record in records:
        groups.setdefault((record.estimator, record.sweep_value), []).append(record)
    out: dict[str, dict] = {}
    for (estimator, sweep) in sorted(groups):
        block = out.setdefault(estimator, {
            "sweep_values": [], "mean": [], "median": [], "se": [],
            "q05": [], "q95": [], "nonconverged": [],
        })
        risks = np.sort(np.array([r.risk for r in groups[(estimator, sweep)]]))
        block["sweep_values"].append(sweep)
        block["mean"].append(float(np.mean(risks)))
        block["median"].append(float(np.median(risks)))
        block["se"].append(float(np.std(risks, ddof=1) / math.sqrt(len(risks))) if len(risks) > 1 else 0.0)
        block["q05"].append(float(np.quantile(risks, 0.05)))
        block["q95"].append(float(np.quantile(risks, 0.95)))
        block["nonconverged"].append(sum(0 if r.converged else 1 for r in groups[(estimator, sweep)]))
    return out


def _top_decade(values: list[float]) -> list[float]:
    top = max(values)
    return [v for v in values if v > 0.0 and v >= top / 10.000001]


def _loglog_slope(sweeps: list[float], means: list[float]) -> float:
    pts = [(s, m) for s, m in zip(sweeps, means) if s in set(_top_decade(sweeps))]
    xs = np.log10([s for s, _ in pts])
    ys = np.log10([max(m, 1.0e-300) for _, m in pts])
    return float(np.polyfit(xs, ys, 1)[0])


def _check(value: float, lo: float | None, hi: float | None) -> dict:
    passed = True
    if lo is not None:
        passed = passed and value >= lo
    if hi is not None:
        passed = passed and value <= hi
    return {"value": value, "low": lo, "high": hi, "passed": bool(passed)}


def _nonconvergence_check(records: tuple[RiskRecord, ...]) -> dict:
    frac = sum(0 if r.converged else 1 for r in records) / len(records)
    return _check(frac, None, _MAX_NONCONVERGED_FRACTION)


def _base_summary(plan: _Plan, records: tuple[RiskRecord, ...]) -> dict:
    cfg = plan.config
    return {
        "experiment": cfg.name,
        "n": cfg.n,
        "p": cfg.p,
        "gamma": cfg.gamma,
        "replications": cfg.replications,
        "master_seed": cfg.master_seed,
        "q_sigma": q_sigma(plan.spec),
        "sigma2_unit": plan.sigma2_unit,
        "tau_unit": plan.tau_unit,
        "estimators": summarize(records),
    }


def _finish(plan: _Plan, records: tuple[RiskRecord, ...], checks: dict) -> ExperimentResult:
    summary = _base_summary(plan, records)
    summary["checks"] = checks
    summary["passed"] = all(c["passed"] for c in checks.values())
    return ExperimentResult(config=plan.config, records=records, summary=summary)


def run_paradox(config: ExperimentConfig) -> ExperimentResult:
    """Noise-scale sweep of OLS, fixed-penalty ridge, and noise-adapted
    transfer ridge: the first two diverge with slope two, the third sits on a
    plateau at the misalignment energy."""
    plan = _build_plan(config)
    if config.n <= config.p:
        raise ConfigError("this experiment fits unpenalized least squares and needs n > p")
    records = _collect_records(plan)
    stats = summarize(records)
    q = q_sigma(plan.spec)
    checks = {
        "ols_slope": _check(_loglog_slope(stats["ols"]["sweep_values"], stats["ols"]["mean"]),
                            *_SLOPE_BAND_SQUARED),
        "fixed_ridge_slope": _check(_loglog_slope(stats["fixed_ridge"]["sweep_values"],
                                                  stats["fixed_ridge"]["mean"]), *_SLOPE_BAND_SQUARED),
        "transfer_plateau_ratio": _check(stats["transfer_ridge"]["mean"][-1] / q,
                                         1.0 - _PLATEAU_RTOL, 1.0 + _PLATEAU_RTOL),
        "noiseless_ols_risk": _check(stats["ols"]["mean"][0], None, 1.0e-12),
        "nonconverged_fraction": _nonconvergence_check(records),
    }
    return _finish(plan, records, checks)


def run_floor(config: ExperimentConfig) -> ExperimentResult:
    """Transfer ridge versus transfer lasso along the noise-scale sweep: both
    must land on the same floor at the largest scale."""
    plan = _build_plan(config)
    records = _collect_records(plan)
    stats = summarize(records)
    q = q_sigma(plan.spec)
    ridge_terminal = stats["transfer_ridge"]["mean"][-1]
    lasso_terminal = stats["transfer_lasso"]["mean"][-1]
    checks = {
        "terminal_gap_over_q": _check(abs(ridge_terminal - lasso_terminal) / q, None, _FLOOR_GAP_RTOL),
        "ridge_terminal_ratio": _check(ridge_terminal / q, 1.0 - _PLATEAU_RTOL, 1.0 + _PLATEAU_RTOL),
        "lasso_terminal_ratio": _check(lasso_terminal / q, 1.0 - _PLATEAU_RTOL, 1.0 + _PLATEAU_RTOL),
        "noiseless_within_floor": _check(max(stats["transfer_ridge"]["mean"][0],
                                             stats["transfer_lasso"]["mean"][0]), None, q),
        "nonconverged_fraction": _nonconvergence_check(records),
    }
    return _finish(plan, records, checks)


def run_transient(config: ExperimentConfig) -> ExperimentResult:
    """Monte Carlo risk of noise-adapted transfer ridge across the
    effective-variance grid, against the deterministic closed form."""
    from .theory import TheoryInputs, ridge_risk_closed_form

    plan = _build_plan(config)
    records = _collect_records(plan)
    stats = summarize(records)
    theory = [
        ridge_risk_closed_form(TheoryInputs(plan.spec, config.gamma, sigma2, config.lambda_tilde)).risk
        for sigma2 in stats["transfer_ridge"]["sweep_values"]
    ]
    rel_errors = [abs(mc - th) / th for mc, th in zip(stats["transfer_ridge"]["mean"], theory)]
    checks = {
        "median_relative_error": _check(float(np.median(rel_errors)), None, 0.03),
        "nonconverged_fraction": _nonconvergence_check(records),
    }
    result = _finish(plan, records, checks)
    result.summary["theory_risk"] = theory
    result.summary["relative_errors"] = rel_errors
    return result


def run_trichotomy(config: ExperimentConfig) -> ExperimentResult:
    """Four estimators against the noise-scale sweep: squared-loss curves
    diverge, the Huber fit plateaus, noise-adapted transfer ridge stays at
    the floor."""
    plan = _build_plan(config)
    if config.n <= config.p:
        raise ConfigError("this experiment fits unpenalized least squares and needs n > p")
    records = _collect_records(plan)
    stats = summarize(records)
    q = q_sigma(plan.spec)
    huber_means = stats["huber"]["mean"]
    checks = {
        "ols_slope": _check(_loglog_slope(stats["ols"]["sweep_values"], stats["ols"]["mean"]),
                            *_SLOPE_BAND_SQUARED),
        "fixed_ridge_slope": _check(_loglog_slope(stats["fixed_ridge"]["sweep_values"],
                                                  stats["fixed_ridge"]["mean"]), *_SLOPE_BAND_SQUARED),
        "huber_slope": _check(_loglog_slope(stats["huber"]["sweep_values"], huber_means), *_SLOPE_BAND_FLAT),
        "huber_risk_finite": _check(1.0 if all(map(math.isfinite, huber_means)) else 0.0, 1.0, None),
        "transfer_plateau_ratio": _check(stats["transfer_ridge"]["mean"][-1] / q,
                                         1.0 - _PLATEAU_RTOL, 1.0 + _PLATEAU_RTOL),
        "nonconverged_fraction": _nonconvergence_check(records),
    }
    if config.paper_scale:
        plateau = huber_means[-1]
        checks["huber_plateau"] = _check(plateau, 0.14, 0.24)
        checks["huber_over_floor"] = _check(plateau / q, 149.0, 209.0)
    result = _finish(plan, records, checks)
    result.summary["huber_plateau"] = huber_means[-1]
    result.summary["huber_plateau_over_q"] = huber_means[-1] / q
    return result


def run_universality(config: ExperimentConfig) -> ExperimentResult:
    """Paired Gaussian/Rademacher designs sharing noise streams; the
    transfer-ridge risks must agree within two pooled standard errors."""
    plan = _build_plan(config)
    records = _collect_records(plan)
    stats = summarize(records)
    g = stats["transfer_ridge_gaussian"]
    r = stats["transfer_ridge_rademacher"]
    z_scores = []
    for mg, mr, sg, sr in zip(g["mean"], r["mean"], g["se"], r["se"]):
        pooled = math.sqrt(sg ** 2 + sr ** 2)
        z_scores.append(abs(mg - mr) / pooled if pooled > 0.0 else 0.0)
    checks = {
        "max_design_gap_in_ses": _check(float(np.max(z_scores)), None, 2.0),
        "nonconverged_fraction": _nonconvergence_check(records),
    }
    result = _finish(plan, records, checks)
    result.summary["design_gap_in_ses"] = z_scores
    return result


def run_concentration(config: ExperimentConfig) -> ExperimentResult:
    """Distribution of the normalized winsorized noise energy across sample
    sizes; summarizes the fraction of replications inside [0.9, 1.1]."""
    plan = _build_plan(config)
    records = _collect_records(plan)
    lo, hi = _CONCENTRATION_BAND
    fractions = []
    for n in config.n_grid:
        ratios = [r.risk for r in records if r.sweep_value == float(n)]
        fractions.append(float(np.mean([lo <= x <= hi for x in ratios])))
    monotone = all(a <= b + 1.0e-12 for a, b in zip(fractions, fractions[1:]))
    checks = {
        "in_band_fraction_at_largest_n": _check(fractions[-1], 0.95, None),
        "in_band_fraction_nondecreasing": _check(1.0 if monotone else 0.0, 1.0, None),
    }
    result = _finish(plan, records, checks)
    result.summary["in_band_fractions"] = dict(zip((str(n) for n in config.n_grid), fractions))
    return result


_RUNNERS = {
    "paradox": run_paradox,
    "floor": run_floor,
    "transient": run_transient,
    "trichotomy": run_trichotomy,
    "universality": run_universality,
    "concentration": run_concentration,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Dispatch to the named runner."""
    return _RUNNERS[config.name](config)


# --------------------------------------------------------------------------
# Serialization.
# --------------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: tuple[RiskRecord, ...], path) -> None:
    """Sorted records with shortest round-trip decimal formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([
                r.experiment,
                r.estimator,
                _format_cell(r.sweep_value),
                str(r.replication),
                _format_cell(r.risk),
                _format_cell(r.converged),
                _format_cell(round(r.wall_ms, 3)),
            ])


def write_outputs(result: ExperimentResult, out_dir, tag: str | None = None) -> dict:
    """Write the CSV, the JSON summary, and the resolved-config echo.

    Returns the mapping of artifact names to paths.  The default tag is
    ``seed<master_seed>`` so that reruns with the same configuration land on
    the same filenames.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    tag = tag if tag is not None else f"seed{result.config.master_seed}"
    base = f"{result.config.name}_{tag}"
    paths = {
        "csv": os.path.join(out_dir, base + ".csv"),
        "summary": os.path.join(out_dir, base + ".summary.json"),
        "config": os.path.join(out_dir, base + ".config.json"),
    }
    write_records_csv(result.records, paths["csv"])
    with open(paths["summary"], "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["config"], "w") as fh:
        json.dump(result.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
