"""Data generators and rejection-rate experiments.

Each scenario draws ``m`` independent datasets, runs one test on each and
reports the rejection rate with its binomial standard error. Replicate ``i``
draws its data and its test seed from ``(seed, i)`` alone, so results do not
depend on the number of worker threads.
"""

from __future__ import annotations

import gc
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .causal import DagSpec
from .dataset import DISCRETE, Dataset
from .errors import CholeskyFailure, DegenerateMoments, InputError
from .estimator import dhsic_statistic
from .kernels import KernelSpec, gram_stack, median_bandwidth
from .resampling import DEFAULT_B, PERMUTATION, derive_seed

SIM1 = "Sim1"
SIM2 = "Sim2"
SIM3 = "Sim3"
SIM4 = "Sim4"
SIM5_DENSE = "Sim5Dense"
SIM5_SPARSE = "Sim5Sparse"
SIM6_PAIRWISE = "Sim6Pairwise"
SIM6_SEM = "Sim6Sem"
SIM6_DENSITY = "Sim6Density"
SCENARIOS = (SIM1, SIM2, SIM3, SIM4, SIM5_DENSE, SIM5_SPARSE, SIM6_PAIRWISE, SIM6_SEM, SIM6_DENSITY)

# default d per scenario; None marks a scenario whose d is fixed
_DEFAULT_D = {
    SIM1: 3, SIM2: 2, SIM3: 4, SIM4: 4, SIM5_DENSE: 5, SIM5_SPARSE: 5,
    SIM6_PAIRWISE: 4, SIM6_SEM: 4, SIM6_DENSITY: 3,
}
_FIXED_D = {SIM2, SIM6_DENSITY}

JITTERS = (1e-8, 1e-7, 1e-6, 1e-5)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def gen_iid_normals(n: int, d: int, rng: np.random.Generator) -> Dataset:
    """``d`` independent standard normal columns."""
    return Dataset.from_blocks(list(rng.standard_normal((n, d)).T))


def gen_mixed(n: int, rng: np.random.Generator) -> Dataset:
    """A standard normal column and an independent Bin(20, 0.2) column.

    The binomial column is marked discrete and gets the indicator kernel.
    """
    x1 = rng.standard_normal(n)
    x2 = rng.binomial(20, 0.2, size=n).astype(np.float64)
    return Dataset.from_blocks([x1, x2], kinds=["continuous", DISCRETE])


def gp_draw(x, rng: np.random.Generator, bandwidth: float = 1.0) -> np.ndarray:
    """One joint draw of a zero-mean GP with Gaussian covariance at ``x``.

    The Cholesky factor of the covariance gets a diagonal jitter of 1e-8,
    raised tenfold up to 1e-5 if the factorisation fails.
    """
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None] - x[None, :]
    K = np.exp(diff * diff / (-2.0 * bandwidth * bandwidth))
    z = rng.standard_normal(x.size)
    for jitter in JITTERS:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(x.size))
        except np.linalg.LinAlgError:
            continue
        return L @ z
    raise CholeskyFailure(f"GP covariance not positive definite even with jitter {JITTERS[-1]}")


def gen_anm_gp(n: int, dag: DagSpec, rng: np.random.Generator) -> Dataset:
    """Additive noise model along ``dag`` with GP-sampled edge functions.

    Root nodes are centred Gaussians with sd drawn from U(5*sqrt(2), 10).
    Every other node is a sum of one GP function per parent (unit bandwidth)
    plus Gaussian noise with sd drawn from U(sqrt(2), 2).
    """
    x = np.zeros((n, dag.d))
    for j in dag.topological_order():
        parents = dag.parents[j]
        if not parents:
            x[:, j] = rng.uniform(5.0 * math.sqrt(2.0), 10.0) * rng.standard_normal(n)
            continue
        noise_sd = rng.uniform(math.sqrt(2.0), 2.0)
        total = np.zeros(n)
        for k in parents:
            total += gp_draw(x[:, k], rng)
        x[:, j] = total + noise_sd * rng.standard_normal(n)
    return Dataset.from_blocks(list(x.T))


def random_full_dag(d: int, rng: np.random.Generator) -> DagSpec:
    """Uniform random node order with every forward edge present."""
    order = rng.permutation(d)
    edges = [(int(order[a]), int(order[b])) for a in range(d) for b in range(a + 1, d)]
    return DagSpec.from_edges(d, edges)


def gen_confounder(n: int, d: int, c: float, dense: bool, rng: np.random.Generator) -> Dataset:
    """``X^j = H^2 + c * eps_j`` for every j (dense) or j = 1, 2 (sparse).

    In the sparse case the remaining columns are the noise ``eps_j`` itself.
    """
    h = rng.standard_normal(n)
    eps = rng.standard_normal((n, d))
    x = eps.copy()
    hit = d if dense else min(2, d)
    x[:, :hit] = (h * h)[:, None] + c * eps[:, :hit]
    return Dataset.from_blocks(list(x.T))


def gen_linear_confounder(n: int, d: int, rng: np.random.Generator) -> Dataset:
    """``X^j = H + eps_j`` with ``H`` and ``eps_j`` iid normal of variance 4."""
    h = 2.0 * rng.standard_normal(n)
    x = h[:, None] + 2.0 * rng.standard_normal((n, d))
    return Dataset.from_blocks(list(x.T))


_SIGN_PATTERNS = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)


def gen_pairwise_independent(n: int, rng: np.random.Generator) -> Dataset:
    """Three variables that are pairwise but not jointly independent.

    Absolute standard normals get a sign pattern drawn uniformly from the
    four patterns with an even number of minus signs.
    """
    mags = np.abs(rng.standard_normal((n, 3)))
    signs = _SIGN_PATTERNS[rng.integers(0, 4, size=n)]
    return Dataset.from_blocks(list((mags * signs).T))


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """One rejection-rate experiment.

    ``c`` is the noise scale of the Sim5 scenarios. ``bandwidth`` fixes the
    Gaussian bandwidth of every continuous variable and
    ``bandwidth_scale`` multiplies the median-heuristic bandwidth instead
    (at most one of the two may be set; both apply to dHSIC methods only).
    """

    scenario: str
    n: int
    d: int | None = None
    m: int = 300
    method: str = PERMUTATION
    alpha: float = 0.05
    B: int = DEFAULT_B
    seed: int = 0
    C: int | None = None
    c: float = 1.0
    bandwidth: float | None = None
    bandwidth_scale: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InputError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        d = _DEFAULT_D[self.scenario] if self.d is None else int(self.d)
        if self.scenario in _FIXED_D and d != _DEFAULT_D[self.scenario]:
            raise InputError(f"{self.scenario} has d = {_DEFAULT_D[self.scenario]}")
        object.__setattr__(self, "d", d)
        if d < 2:
            raise InputError("d must be at least 2")
        if self.n < 2:
            raise InputError("n must be at least 2")
        if self.m < 1:
            raise InputError("m must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.c < 0:
            raise InputError("c must be non-negative")
        if self.bandwidth is not None and self.bandwidth_scale is not None:
            raise InputError("set either bandwidth or bandwidth_scale, not both")
        for name in ("bandwidth", "bandwidth_scale"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise InputError(f"{name} must be positive")


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rejections: int
    failures: int = 0
    seconds_per_test: float = 0.0
    decisions: list = field(default_factory=list, repr=False)

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.m

    @property
    def se(self) -> float:
        r = self.rejection_rate
        return math.sqrt(r * (1.0 - r) / self.m)

    def to_record(self) -> dict:
        cfg = self.config
        rec = {
            "scenario": cfg.scenario,
            "method": cfg.method,
            "n": cfg.n,
            "d": cfg.d,
            "m": cfg.m,
            "B": cfg.B,
            "alpha": cfg.alpha,
            "reject_rate": self.rejection_rate,
            "se": self.se,
            "seed": cfg.seed,
        }
        if cfg.scenario in (SIM5_DENSE, SIM5_SPARSE):
            rec["c"] = cfg.c
        if cfg.bandwidth is not None:
            rec["bandwidth"] = cfg.bandwidth
        if cfg.bandwidth_scale is not None:
            rec["bandwidth_scale"] = cfg.bandwidth_scale
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def generate(config: ScenarioConfig, rng: np.random.Generator) -> Dataset:
    """One dataset of the configured scenario."""
    s, n, d = config.scenario, config.n, config.d
    if s == SIM1:
        return gen_iid_normals(n, d, rng)
    if s == SIM2:
        return gen_mixed(n, rng)
    if s == SIM3:
        return gen_anm_gp(n, DagSpec.from_edges(d, [(0, 1)]), rng)
    if s in (SIM4, SIM6_SEM):
        return gen_anm_gp(n, random_full_dag(d, rng), rng)
    if s in (SIM5_DENSE, SIM5_SPARSE):
        return gen_confounder(n, d, config.c, s == SIM5_DENSE, rng)
    if s == SIM6_PAIRWISE:
        return gen_linear_confounder(n, d, rng)
    return gen_pairwise_independent(n, rng)


def scenario_specs(config: ScenarioConfig, dataset: Dataset):
    """Kernel specs implied by the bandwidth settings (``None`` = defaults)."""
    if config.bandwidth is None and config.bandwidth_scale is None:
        return None
    specs = []
    for block, kind in zip(dataset.blocks(), dataset.kinds):
        if kind == DISCRETE:
            specs.append(KernelSpec.discrete())
        elif config.bandwidth is not None:
            specs.append(KernelSpec.gaussian(config.bandwidth))
        else:
            specs.append(KernelSpec.gaussian(config.bandwidth_scale * median_bandwidth(block)))
    return specs


def run_replicate(config: ScenarioConfig, i: int) -> bool | None:
    """Decision of replicate ``i``; ``None`` if the Gamma moments degenerate."""
    from .api import independence_test

    data = generate(config, np.random.default_rng(derive_seed(config.seed, i, 0)))
    try:
        out = independence_test(
            data,
            method=config.method,
            specs=scenario_specs(config, data),
            alpha=config.alpha,
            B=config.B,
            seed=derive_seed(config.seed, i, 1),
            C=config.C,
        )
    except DegenerateMoments:
        return None
    return out.reject


def run_scenario(config: ScenarioConfig, replicates=None) -> ScenarioResult:
    """Run ``m`` replicates (indices ``0..m-1`` unless given) and count
    rejections. Degenerate Gamma fits count as non-rejections and are
    tallied in ``failures``."""
    idx = list(range(config.m)) if replicates is None else [int(i) for i in replicates]
    if len(idx) != config.m:
        raise InputError("need exactly m replicate indices")
    start = time.perf_counter()
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            decisions = list(pool.map(lambda i: run_replicate(config, i), idx))
    else:
        decisions = [run_replicate(config, i) for i in idx]
    elapsed = time.perf_counter() - start
    return ScenarioResult(
        config=config,
        rejections=sum(1 for r in decisions if r),
        failures=sum(1 for r in decisions if r is None),
        seconds_per_test=elapsed / config.m,
        decisions=decisions,
    )


# ---------------------------------------------------------------------------
# Runtime scaling
# ---------------------------------------------------------------------------


def time_dhsic(n: int, d: int, repeats: int = 5, seed: int = 0) -> float:
    """Median wall-clock seconds of Gram construction plus the estimator on
    ``d`` iid normal columns."""
    data = gen_iid_normals(n, d, np.random.default_rng(seed))
    dhsic_statistic(gram_stack(data))  # warm-up
    times = []
    gc.collect()
    enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repeats):
            t0 = time.perf_counter()
            dhsic_statistic(gram_stack(data))
            times.append(time.perf_counter() - t0)
    finally:
        if enabled:
            gc.enable()
    return float(np.median(times))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
