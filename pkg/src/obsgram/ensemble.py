"""Monte Carlo ensembles of stochastic empirical Gramians.

Sample ``k`` of an ensemble is driven by ``derive_stream(base_seed, k)``
(for sweeps, ``derive_stream(derive_stream(base_seed, cell), k)``), and
each of its 2n perturbed trajectories by a further stream of that seed.
Samples are therefore independent of batching and execution order, and the
whole ensemble is reproducible from the base seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .gramian import GramianResult, batch_gramians, sample_perturbed_outputs
from .integrate import TimeGrid, derive_stream, integrate_sde, stack_paths
from .closed_form import mean_gramian_parts
from .systems import ControlSignal, SystemModel, build_system

__all__ = [
    "EnsembleError",
    "EnsembleConfig",
    "MetricSummary",
    "EnsembleSummary",
    "EnsembleResult",
    "SweepRow",
    "Decomposition",
    "HeadingResult",
    "summarize_metric",
    "run_ensemble",
    "sweep",
    "empirical_decomposition",
    "heading_experiment",
    "METRICS",
]

METRICS = ("lambda_min", "nu", "kappa")
_MAX_FAIL_FRACTION = 0.10
_CHUNK_FLOATS = 8_000_000


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything needed to reproduce an ensemble.

    ``system`` is a registry name (with ``params``) or a ready
    :class:`SystemModel`.  ``control=None`` means the model's default.
    """

    system: str | SystemModel
    x0: tuple
    eps: float
    t1: float
    dt: float = 1e-3
    samples: int = 500
    base_seed: int = 0
    params: dict = field(default_factory=dict)
    control: ControlSignal | None = None
    sweep_param: str | None = None
    sweep_values: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if any(not math.isfinite(v) for v in self.sweep_values):
            raise ValueError("sweep values must be finite")

    @property
    def grid(self):
        return TimeGrid(self.t1, self.dt)

    def model(self, **overrides):
        if isinstance(self.system, SystemModel):
            if overrides:
                raise ValueError("cannot override parameters of a prebuilt model")
            return self.system
        params = dict(self.params)
        params.update(overrides)
        return build_system(self.system, params)


@dataclass(frozen=True)
class MetricSummary:
    median: float
    q25: float
    q75: float
    p5: float
    p95: float
    mean: float
    n_degenerate: int
    count: int


def summarize_metric(values):
    """Quantile summary over the finite entries; infinite ones are only counted."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    n_deg = int(values.size - finite.size)
    if finite.size == 0:
        return MetricSummary(*([math.inf] * 6), n_degenerate=n_deg, count=0)
    p5, q25, med, q75, p95 = np.percentile(finite, [5, 25, 50, 75, 95])
    return MetricSummary(
        median=float(med), q25=float(q25), q75=float(q75), p5=float(p5), p95=float(p95),
        mean=float(finite.mean()), n_degenerate=n_deg, count=int(finite.size),
    )


@dataclass(frozen=True)
class EnsembleSummary:
    metrics: dict
    mean_gramian: np.ndarray
    gramian_se: np.ndarray
    n_samples: int
    n_failed: int

    def __getitem__(self, metric):
        return self.metrics[metric]


@dataclass(frozen=True)
class EnsembleResult:
    gramians: list
    summary: EnsembleSummary
    sample_indices: tuple
    failed_indices: tuple

    def metric(self, name):
        return np.array([getattr(g, "sigma_min" if name == "lambda_min" else name) for g in self.gramians])


def _chunk_size(model, grid):
    per_sample = 2 * model.n * grid.node_count * max(model.n, model.p, 1)
    return max(1, _CHUNK_FLOATS // per_sample)


def _run_chunk(model, x0, u, eps, grid, seeds):
    values, failed = sample_perturbed_outputs(model, x0, u, eps, grid, seeds)
    good = ~failed
    W = np.full((len(seeds), model.n, model.n), np.nan)
    if good.any():
        W[good] = batch_gramians(values[:, good], eps, grid)
    return W, failed


def _sample_gramians(model, x0, u, eps, grid, seeds, workers=1):
    chunk = _chunk_size(model, grid)
    pieces = [seeds[i:i + chunk] for i in range(0, len(seeds), chunk)]

    def job(s):
        return _run_chunk(model, x0, u, eps, grid, s)

    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, pieces))
    else:
        results = [job(s) for s in pieces]
    W = np.concatenate([r[0] for r in results])
    failed = np.concatenate([r[1] for r in results])
    return W, failed


def _ensemble_from_seeds(model, x0, u, eps, grid, seeds, meta, workers=1):
    u = model.control(u)
    W, failed = _sample_gramians(model, np.asarray(x0, dtype=float), u, eps, grid, seeds, workers)
    n_failed = int(failed.sum())
    if n_failed > _MAX_FAIL_FRACTION * len(seeds):
        raise EnsembleError(f"{n_failed} of {len(seeds)} samples diverged")
    gramians = []
    kept = []
    for k, (Wk, bad) in enumerate(zip(W, failed)):
        if bad:
            continue
        m = dict(meta, sample_index=k, seed=int(seeds[k]))
        gramians.append(GramianResult.from_matrix(Wk, m))
        kept.append(k)
    if not gramians:
        raise EnsembleError("every sample diverged")
    Wgood = W[~failed]
    lam = np.array([g.sigma_min for g in gramians])
    summary = EnsembleSummary(
        metrics={
            "lambda_min": summarize_metric(lam),
            "nu": summarize_metric([g.nu for g in gramians]),
            "kappa": summarize_metric([g.kappa for g in gramians]),
        },
        mean_gramian=Wgood.mean(axis=0),
        gramian_se=(Wgood.std(axis=0, ddof=1) / math.sqrt(len(Wgood))) if len(Wgood) > 1 else np.zeros_like(Wgood[0]),
        n_samples=len(gramians),
        n_failed=n_failed,
    )
    failed_idx = tuple(int(i) for i in np.flatnonzero(failed))
    return EnsembleResult(gramians, summary, tuple(kept), failed_idx)


def _meta(config, model, u):
    return {
        "system": model.name,
        "params": {k: v for k, v in model.params.items() if k != "spec"},
        "x0": [float(v) for v in config.x0],
        "control": u.describe(),
        "eps": float(config.eps),
        "t1": float(config.t1),
        "dt": float(config.dt),
        "base_seed": int(config.base_seed),
    }


def run_ensemble(config):
    """Draw ``config.samples`` stochastic Gramians and summarize them.

    Samples whose trajectories diverge are dropped and counted in
    ``summary.n_failed``; more than 10% failures raises
    :class:`EnsembleError`.
    """
    model = config.model()
    u = model.control(config.control)
    seeds = [derive_stream(config.base_seed, k) for k in range(config.samples)]
    return _ensemble_from_seeds(model, config.x0, u, config.eps, config.grid, seeds, _meta(config, model, u), config.workers)


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    summary: EnsembleSummary
    result: EnsembleResult


def sweep(config):
    """One ensemble per value of ``config.sweep_param``.

    Cell ``c`` uses base seed ``derive_stream(config.base_seed, c)``.
    """
    if not config.sweep_param:
        raise ValueError("sweep needs sweep_param")
    values = [float(v) for v in config.sweep_values]
    if not values:
        raise ValueError("sweep needs at least one value")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError("sweep values must be sorted")
    rows = []
    for c, val in enumerate(values):
        model = config.model(**{config.sweep_param: val})
        u = model.control(config.control)
        cell_seed = derive_stream(config.base_seed, c)
        seeds = [derive_stream(cell_seed, k) for k in range(config.samples)]
        meta = _meta(config, model, u)
        meta["sweep"] = {"param": config.sweep_param, "value": val, "cell": c}
        res = _ensemble_from_seeds(model, config.x0, u, config.eps, config.grid, seeds, meta, config.workers)
        rows.append(SweepRow(val, res.summary, res))
    return rows


@dataclass(frozen=True)
class Decomposition:
    """Empirical split of the mean sample Gramian.

    ``W_hat`` uses the biased covariance of the paired differences
    ``y^{+i} - y^{-i}``, which makes ``diag(W_bar + W_hat)`` equal
    ``diag(mean_sample_gramian)`` identically.  ``W_hat_separate`` uses
    ``Cov[y^{+i}] + Cov[y^{-i}]`` instead; the two agree in expectation.
    """

    W_bar: np.ndarray
    W_hat: np.ndarray
    W_hat_separate: np.ndarray
    mean_sample_gramian: np.ndarray
    samples: int

    @property
    def offdiag_gap(self):
        D = self.mean_sample_gramian - self.W_bar
        return float(np.linalg.norm(D - np.diag(np.diag(D))))


def empirical_decomposition(model, x0, u, eps, grid, samples, seed):
    """Mean/covariance split of ``samples`` stochastic Gramians.

    The k-th sample Gramian pairs the k-th path of every perturbation, and
    uses the same seeds as ``run_ensemble`` with ``base_seed=seed``.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    u = model.control(u)
    x0 = np.asarray(x0, dtype=float)
    seeds = [derive_stream(seed, k) for k in range(samples)]
    chunk = _chunk_size(model, grid)
    nodes, n = grid.node_count, model.n
    s_y = s_d2 = s_y2 = s_W = ref = None
    total = 0
    for i in range(0, samples, chunk):
        vals, failed = sample_perturbed_outputs(model, x0, u, eps, grid, seeds[i:i + chunk])
        if failed.any():
            raise EnsembleError("a decomposition sample diverged")
        if ref is None:
            # shifted sums: identical samples then give exactly zero covariance
            ref = vals[:, :1].copy()
        c = vals - ref
        d = c[:, :, :, 0] - c[:, :, :, 1]  # (nodes, S, n, p)
        parts = (
            c.sum(axis=1),
            (d * d).sum(axis=(1, 3)),
            (c * c).sum(axis=(1, 4)),
            batch_gramians(vals, eps, grid).sum(axis=0),
        )
        if s_y is None:
            s_y, s_d2, s_y2, s_W = parts
        else:
            s_y, s_d2, s_y2, s_W = (a + b for a, b in zip((s_y, s_d2, s_y2, s_W), parts))
        total += vals.shape[1]
    mean_c = s_y / total  # (nodes, n, 2, p), relative to ref
    mean_y = mean_c + ref[:, 0]
    mean_dc = mean_c[:, :, 0] - mean_c[:, :, 1]
    cov_d = np.maximum(s_d2 / total - (mean_dc * mean_dc).sum(axis=-1), 0.0)
    cov_sep = np.maximum(s_y2 / total - (mean_c * mean_c).sum(axis=-1), 0.0).sum(axis=-1)
    W_bar, W_hat = mean_gramian_parts(mean_y[:, :, 0], mean_y[:, :, 1], cov_d, eps, grid)
    _, W_hat_sep = mean_gramian_parts(mean_y[:, :, 0], mean_y[:, :, 1], cov_sep, eps, grid)
    return Decomposition(W_bar, W_hat, W_hat_sep, s_W / total, total)


@dataclass(frozen=True)
class HeadingResult:
    angles: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    n_excluded: int

    def top_bins(self, k=2):
        """Centres (degrees) of the ``k`` most populated bins, largest first."""
        order = np.argsort(-self.counts, kind="stable")[:k]
        centres = 0.5 * (self.edges[:-1] + self.edges[1:])
        return centres[order], self.counts[order]


def heading_experiment(q, samples=1000, t1=10.0, seed=0, dt=1e-3, heading_deg=45.0, noise_channel="speed"):
    """Direction of the final position of a noisy unicycle started at rest.

    Runs start at the origin with the given heading, zero speed and zero
    control.  Angles are ``atan2(y2, y1)`` in degrees on ``[0, 360)``,
    binned into 36 bins of 10 degrees.  Runs that end exactly at the origin
    have no direction and are excluded.
    """
    model = build_system("unicycle_sde", {"q": q, "noise_channel": noise_channel})
    grid = TimeGrid(t1, dt)
    u = ControlSignal.zero(2)
    x0 = np.array([0.0, 0.0, math.radians(heading_deg), 0.0])
    seeds = [derive_stream(seed, k) for k in range(samples)]
    chunk = max(1, _CHUNK_FLOATS // (grid.node_count * model.n))
    finals = []
    for i in range(0, samples, chunk):
        part = seeds[i:i + chunk]
        Z = stack_paths(part, model.q_w, grid.steps)
        traj = integrate_sde(model, np.tile(x0, (len(part), 1)), u, grid, Z)
        finals.append(model.output(traj.states[-1]))
    y = np.concatenate(finals)
    at_origin = np.all(y == 0.0, axis=1)
    y = y[~at_origin]
    angles = np.degrees(np.arctan2(y[:, 1], y[:, 0])) % 360.0
    counts, edges = np.histogram(angles, bins=36, range=(0.0, 360.0))
    return HeadingResult(angles, counts, edges, int(at_origin.sum()))
