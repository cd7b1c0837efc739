"""Replicated simulate -> estimate experiments.

Each replicate ``r`` at grid position ``g`` draws from its own random stream
``(seed, spawn_key=(g, r))``, so the report does not depend on how many
workers run or in which order replicates finish.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import PARAM_NAMES, TRANSFORMED_NAMES, confidence_intervals, covariance_original
from .errors import ConfigError, HestonClseError, NearSingularCovariance
from .estimate import clse_original
from .model import HestonParams, forward_transform
from .simulate import SimulationConfig, simulate_path

__all__ = [
    "ExperimentConfig",
    "ReplicateRecord",
    "LayerStats",
    "SampleSizeReport",
    "ExperimentReport",
    "run_experiment",
    "run_replicate",
    "whiten_errors",
    "inverse_sqrt",
    "resolve_threads",
]

logger = logging.getLogger(__name__)

THREADS_ENV = "HESTON_CLSE_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    params: HestonParams
    n_grid: tuple[int, ...]
    replicates: int
    seed: int = 0
    level: float = 0.95
    sim: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid:
            raise ConfigError("n_grid must not be empty")
        if any(n < 2 for n in grid):
            raise ConfigError(f"every sample size must be >= 2, got {grid}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"n_grid must be strictly increasing, got {grid}")
        if int(self.replicates) < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class ReplicateRecord:
    n: int
    replicate: int
    transformed: np.ndarray  # nan if failed
    original: np.ndarray  # nan if failed or out of image
    out_of_image: bool
    failed: bool
    covered: np.ndarray  # per-parameter CI coverage, False when no interval
    error: str | None = None


@dataclass(frozen=True, eq=False)
class LayerStats:
    """Moment and normality statistics of one parametrisation at one ``n``."""

    names: tuple[str, ...]
    truth: np.ndarray
    count: int
    bias: np.ndarray
    rmse: np.ndarray
    scaled_cov: np.ndarray  # sample covariance of sqrt(n) (theta_hat - theta)
    theory_cov: np.ndarray
    whitened_mean: np.ndarray
    whitened_var: np.ndarray
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray
    mahalanobis_ks_stat: float
    mahalanobis_ks_pvalue: float
    whitened: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        def vec(v):
            return dict(zip(self.names, np.asarray(v, dtype=float).tolist()))

        return {
            "count": self.count,
            "truth": vec(self.truth),
            "bias": vec(self.bias),
            "rmse": vec(self.rmse),
            "scaled_cov": np.asarray(self.scaled_cov).tolist(),
            "theory_cov": np.asarray(self.theory_cov).tolist(),
            "whitened_mean": vec(self.whitened_mean),
            "whitened_var": vec(self.whitened_var),
            "ks_stat": vec(self.ks_stat),
            "ks_pvalue": vec(self.ks_pvalue),
            "mahalanobis_ks_stat": self.mahalanobis_ks_stat,
            "mahalanobis_ks_pvalue": self.mahalanobis_ks_pvalue,
        }


@dataclass(frozen=True, eq=False)
class SampleSizeReport:
    n: int
    replicates: int
    failed: int
    out_of_image: int
    transformed: LayerStats
    original: LayerStats
    coverage: np.ndarray
    coverage_count: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "replicates": self.replicates,
            "failed": self.failed,
            "out_of_image": self.out_of_image,
            "coverage": dict(zip(PARAM_NAMES, self.coverage.tolist())),
            "coverage_count": self.coverage_count,
            "transformed": self.transformed.to_dict(),
            "original": self.original.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    per_n: tuple[SampleSizeReport, ...]
    records: tuple[ReplicateRecord, ...] = field(repr=False)

    def __getitem__(self, n: int) -> SampleSizeReport:
        for rep in self.per_n:
            if rep.n == n:
                return rep
        raise KeyError(n)

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "params": cfg.params.to_dict(),
                "n_grid": list(cfg.n_grid),
                "replicates": cfg.replicates,
                "seed": cfg.seed,
                "level": cfg.level,
                "sim": {"substeps": cfg.sim.substeps, "scheme": cfg.sim.scheme.value},
            },
            "results": [rep.to_dict() for rep in self.per_n],
        }


def resolve_threads(threads: int | None) -> int:
    """Worker count: explicit value, else ``$HESTON_CLSE_THREADS``, else 1.

    ``0`` means one worker per CPU.
    """
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is None or env.strip() == "":
            return 1
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if threads < 0:
        raise ConfigError(f"threads must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def inverse_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a positive definite matrix."""
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise NearSingularCovariance("covariance has non-finite entries")
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < 1e-14 * np.trace(sym):
        raise NearSingularCovariance(
            f"min eigenvalue {vals.min():g} below 1e-14 * trace ({np.trace(sym):g})"
        )
    return (vecs / np.sqrt(vals)) @ vecs.T


def whiten_errors(errors: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Map each row ``e`` of ``errors`` to ``cov^{-1/2} e``."""
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    return errors @ inverse_sqrt(cov)  # cov^{-1/2} is symmetric


def run_replicate(cfg: ExperimentConfig, grid_index: int, replicate: int) -> ReplicateRecord:
    """One simulate -> estimate -> interval pipeline; errors are recorded, not raised."""
    n = cfg.n_grid[grid_index]
    nan4 = np.full(4, np.nan)
    no_cover = np.zeros(4, dtype=bool)
    sim = SimulationConfig(substeps=cfg.sim.substeps, seed=cfg.seed, scheme=cfg.sim.scheme)
    try:
        obs = simulate_path(cfg.params, n, sim, stream=(grid_index, replicate))
        est = clse_original(obs)
    except (HestonClseError, FloatingPointError, ValueError) as exc:
        logger.debug("replicate (%d, %d) failed: %s", n, replicate, exc)
        return ReplicateRecord(n, replicate, nan4, nan4, False, True, no_cover, str(exc))
    transformed = est.transformed.as_array()
    if est.original is None:
        return ReplicateRecord(n, replicate, transformed, nan4, True, False, no_cover)
    try:
        ci = confidence_intervals(est, cfg.params, cfg.level)
        covered = ci.covers(cfg.params.drift.as_array())
    except (HestonClseError, FloatingPointError, ValueError) as exc:
        logger.debug("intervals for replicate (%d, %d) failed: %s", n, replicate, exc)
        covered = no_cover
    return ReplicateRecord(n, replicate, transformed, est.original.as_array(), False, False, covered)


def _layer_stats(names, estimates: np.ndarray, truth: np.ndarray, theory_cov: np.ndarray, n: int) -> LayerStats:
    k = len(names)
    count = estimates.shape[0]
    nan = np.full(k, np.nan)
    if count == 0:
        return LayerStats(names, truth, 0, nan, nan, np.full((k, k), np.nan), theory_cov,
                          nan, nan, nan, nan, float("nan"), float("nan"), np.empty((0, k)))
    err = estimates - truth
    bias = err.mean(axis=0)
    rmse = np.sqrt((err * err).mean(axis=0))
    scaled = np.sqrt(n) * err
    scaled_cov = np.cov(scaled, rowvar=False) if count > 1 else np.zeros((k, k))
    try:
        whitened = whiten_errors(scaled, theory_cov)
    except (NearSingularCovariance, np.linalg.LinAlgError) as exc:
        # degenerate limit law (e.g. vanishing volatility): report moments only
        logger.warning("no whitening at n=%d: %s", n, exc)
        return LayerStats(names, truth, count, bias, rmse, scaled_cov, theory_cov,
                          nan, nan, nan, nan, float("nan"), float("nan"), np.empty((0, k)))
    w_mean = whitened.mean(axis=0)
    w_var = whitened.var(axis=0, ddof=1) if count > 1 else np.zeros(k)
    ks = [stats.kstest(whitened[:, j], "norm") for j in range(k)]
    maha = stats.kstest(np.sum(whitened * whitened, axis=1), "chi2", args=(k,))
    return LayerStats(
        names=names,
        truth=truth,
        count=count,
        bias=bias,
        rmse=rmse,
        scaled_cov=scaled_cov,
        theory_cov=theory_cov,
        whitened_mean=w_mean,
        whitened_var=w_var,
        ks_stat=np.array([r.statistic for r in ks]),
        ks_pvalue=np.array([r.pvalue for r in ks]),
        mahalanobis_ks_stat=float(maha.statistic),
        mahalanobis_ks_pvalue=float(maha.pvalue),
        whitened=whitened,
    )


def _theory(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    try:
        cov = covariance_original(cfg.params)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.warning("asymptotic covariance unavailable: %s", exc)
        nan = np.full((4, 4), np.nan)
        return nan, nan
    return cov.e_mat, cov.sandwich


def _aggregate(cfg: ExperimentConfig, n: int, records: list[ReplicateRecord]) -> SampleSizeReport:
    e_mat, sandwich = _theory(cfg)
    ok = [r for r in records if not r.failed]
    in_image = [r for r in ok if not r.out_of_image]
    transformed = np.array([r.transformed for r in ok]).reshape(-1, 4)
    original = np.array([r.original for r in in_image]).reshape(-1, 4)
    covered = np.array([r.covered for r in in_image]).reshape(-1, 4)
    coverage = covered.mean(axis=0) if covered.size else np.full(4, np.nan)
    return SampleSizeReport(
        n=n,
        replicates=len(records),
        failed=len(records) - len(ok),
        out_of_image=len(ok) - len(in_image),
        transformed=_layer_stats(
            TRANSFORMED_NAMES, transformed, forward_transform(cfg.params).as_array(), e_mat, n
        ),
        original=_layer_stats(PARAM_NAMES, original, cfg.params.drift.as_array(), sandwich, n),
        coverage=coverage,
        coverage_count=len(in_image),
    )


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Run ``cfg.replicates`` independent pipelines for every ``n`` in ``cfg.n_grid``.

    The result is a deterministic function of ``cfg``; ``threads`` only
    affects wall time.
    """
    workers = resolve_threads(threads)
    tasks = [(g, r) for g in range(len(cfg.n_grid)) for r in range(cfg.replicates)]
    logger.info("running %d replicates on %d worker(s)", len(tasks), workers)
    if workers == 1:
        records = [run_replicate(cfg, g, r) for g, r in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda task: run_replicate(cfg, *task), tasks))
    records.sort(key=lambda rec: (rec.n, rec.replicate))
    per_n = tuple(
        _aggregate(cfg, n, [rec for rec in records if rec.n == n]) for n in cfg.n_grid
    )
    return ExperimentReport(config=cfg, per_n=per_n, records=tuple(records))
