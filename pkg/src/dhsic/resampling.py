"""Resampling tests for joint independence.

A resampling map ``psi = (psi^1, ..., psi^d)`` reindexes each variable's rows
independently: row ``i`` of the output is ``(x^1_{psi^1(i)}, ..., x^d_{psi^d(i)})``.
Uniform permutations give the permutation test, uniform arbitrary maps the
bootstrap test. Maps are stored 0-based.

Every Monte-Carlo replicate ``i`` draws from its own generator seeded by
``(seed, i)``, so results do not depend on how replicates are scheduled
across workers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset import Dataset
from .errors import IndexOutOfRange, InputError, TooLarge
from .estimator import dhsic_statistic
from .kernels import GramStack, KernelSpec, gram_stack

PERMUTATION = "permutation"
BOOTSTRAP = "bootstrap"
KINDS = (PERMUTATION, BOOTSTRAP)

DEFAULT_B = 100
ENUMERATION_BUDGET = 10_000


@dataclass(frozen=True, eq=False)
class ResampleMap:
    """``d`` index arrays of length ``n`` (0-based) and the map family."""

    maps: np.ndarray
    kind: str = PERMUTATION

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.intp)
        if maps.ndim != 2:
            raise InputError("maps must have shape (d, n)")
        object.__setattr__(self, "maps", maps)
        if self.kind not in KINDS:
            raise InputError(f"unknown resampling kind {self.kind!r}")
        n = maps.shape[1]
        if maps.size and (maps.min() < 0 or maps.max() >= n):
            raise IndexOutOfRange(f"map entries must lie in 0..{n - 1}")
        if self.kind == PERMUTATION:
            ref = np.arange(n)
            if any(not np.array_equal(np.sort(m), ref) for m in maps):
                raise InputError("permutation maps must be bijections")

    @property
    def d(self) -> int:
        return self.maps.shape[0]

    @property
    def n(self) -> int:
        return self.maps.shape[1]

    @classmethod
    def identity(cls, n: int, d: int) -> "ResampleMap":
        return cls(np.tile(np.arange(n), (d, 1)), PERMUTATION)


def resample_apply(dataset: Dataset, psi: ResampleMap) -> Dataset:
    """Reindex the rows of each variable by its own map."""
    if psi.d != dataset.d or psi.n != dataset.n:
        raise IndexOutOfRange(
            f"map of shape (d={psi.d}, n={psi.n}) does not fit dataset (d={dataset.d}, n={dataset.n})"
        )
    out = np.empty_like(dataset.values)
    for g, m in zip(dataset.groups, psi.maps):
        out[:, g] = dataset.values[m][:, g]
    return Dataset(out, dataset.groups, dataset.kinds)


def replicate_rng(seed: int, i: int) -> np.random.Generator:
    """Generator for replicate ``i``, derived from ``(seed, i)`` only."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(i)]))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit child seed derived from ``seed`` and integer ``keys``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def draw_resample_map(n: int, d: int, kind: str, rng: np.random.Generator) -> ResampleMap:
    """Draw ``d`` independent uniform permutations or index arrays."""
    if n < 1:
        raise InputError("n must be at least 1")
    if kind == PERMUTATION:
        maps = np.stack([rng.permutation(n) for _ in range(d)])
    elif kind == BOOTSTRAP:
        maps = rng.integers(0, n, size=(d, n))
    else:
        raise InputError(f"unknown resampling kind {kind!r}")
    return ResampleMap(maps, kind)


@dataclass
class TestOutcome:
    """Result of one joint independence test.

    ``statistic`` is ``n * dHSIC`` for the dHSIC tests (the BMR statistic for
    the BMR baseline). ``crit_value`` is ``inf`` when the test cannot reject.
    """

    __test__ = False  # keep pytest from collecting this class

    method: str
    statistic: float
    p_value: float
    crit_value: float
    reject: bool
    alpha: float
    n: int
    d: int
    B: int | None = None
    seed: int | None = None
    bandwidths: list = field(default_factory=list)
    resampled_stats: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self, include_resampled: bool = False) -> dict:
        out = asdict(self)
        out.pop("resampled_stats")
        if include_resampled and self.resampled_stats is not None:
            out["resampled_stats"] = [float(t) for t in self.resampled_stats]
        return out


def _compute_stats(stat_of_map: Callable, n: int, d: int, kind: str, B: int, seed: int, workers: int) -> np.ndarray:
    def one(i):
        return stat_of_map(draw_resample_map(n, d, kind, replicate_rng(seed, i)))

    if workers is None or workers <= 1 or B < 2:
        return np.array([one(i) for i in range(B)], dtype=np.float64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(one, range(B))), dtype=np.float64)


def mc_pvalue_from_stats(t_obs: float, stats) -> float:
    """``(1 + #{T_i >= T}) / (1 + B)``; ties count as exceedances."""
    stats = np.asarray(stats, dtype=np.float64)
    return (1.0 + np.count_nonzero(stats >= t_obs)) / (1.0 + stats.size)


def mc_critval_from_stats(t_obs: float, stats, alpha: float) -> float:
    """Critical value of the Monte-Carlo test.

    ``ind = ceil((B + 1)(1 - alpha)) + #{T_i == T}``; the critical value is
    the ``ind``-th smallest resampled statistic, or ``inf`` if ``ind > B``.
    Rejecting when ``T >= crit`` reproduces the ``p <= alpha`` decision.
    """
    stats = np.asarray(stats, dtype=np.float64)
    B = stats.size
    ties = int(np.count_nonzero(stats == t_obs))
    ind = _ceil_exact((B + 1) * (1.0 - alpha)) + ties
    if ind > B:
        return math.inf
    return float(np.sort(stats)[ind - 1])


def _ceil_exact(x: float) -> int:
    # (B+1)(1-alpha) can land a hair above an integer in floating point
    # (e.g. 20 * 0.95 = 19.000000000000004); snap those to the integer.
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def monte_carlo_test(
    stat_of_map: Callable[[ResampleMap], float],
    t_obs: float,
    n: int,
    d: int,
    kind: str = PERMUTATION,
    B: int = DEFAULT_B,
    alpha: float = 0.05,
    seed: int = 0,
    workers: int = 1,
    method: str | None = None,
) -> TestOutcome:
    """Generic Monte-Carlo resampling test for any statistic of ``psi``.

    ``stat_of_map(psi)`` must return the statistic on the data resampled by
    ``psi``; ``t_obs`` is its value on the original data.
    """
    if B < 1:
        raise InputError("B must be at least 1")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    stats = _compute_stats(stat_of_map, n, d, kind, B, seed, workers)
    p = mc_pvalue_from_stats(t_obs, stats)
    crit = mc_critval_from_stats(t_obs, stats, alpha)
    return TestOutcome(
        method=method or kind,
        statistic=float(t_obs),
        p_value=float(p),
        crit_value=crit,
        reject=bool(p <= alpha),
        alpha=float(alpha),
        n=n,
        d=d,
        B=int(B),
        seed=int(seed),
        resampled_stats=stats,
    )


def dhsic_resampling_test(
    dataset: Dataset,
    specs: Sequence[KernelSpec] | None = None,
    kind: str = PERMUTATION,
    B: int = DEFAULT_B,
    alpha: float = 0.05,
    seed: int = 0,
    workers: int = 1,
    grams: GramStack | None = None,
) -> TestOutcome:
    """Monte-Carlo permutation or bootstrap test with statistic ``n * dHSIC``.

    Kernel bandwidths are fixed on the original data and reused for every
    resample. Resampled Gram matrices are obtained by reindexing the
    original ones, which is equivalent to recomputing them on the
    reindexed dataset.
    """
    if grams is None:
        grams = gram_stack(dataset, specs)
    n, d = grams.n, grams.d
    t_obs = dhsic_statistic(grams).scaled

    def stat_of_map(psi):
        return dhsic_statistic(grams.reindex(psi.maps)).scaled

    out = monte_carlo_test(stat_of_map, t_obs, n, d, kind, B, alpha, seed, workers)
    out.bandwidths = grams.bandwidths
    return out


def mc_pvalue(dataset, specs=None, kind=PERMUTATION, B=DEFAULT_B, seed=0, alpha=0.05, workers=1) -> TestOutcome:
    """Monte-Carlo test decided by the p-value (reject iff ``p <= alpha``)."""
    return dhsic_resampling_test(dataset, specs, kind, B, alpha, seed, workers)


def mc_critval(dataset, specs=None, kind=PERMUTATION, B=DEFAULT_B, alpha=0.05, seed=0, workers=1) -> TestOutcome:
    """Monte-Carlo test decided by the critical value (reject iff ``T >= crit``)."""
    out = dhsic_resampling_test(dataset, specs, kind, B, alpha, seed, workers)
    out.reject = bool(out.statistic >= out.crit_value)
    return out


permutation_test = mc_pvalue


def bootstrap_test(dataset, specs=None, B=DEFAULT_B, alpha=0.05, seed=0, workers=1) -> TestOutcome:
    return dhsic_resampling_test(dataset, specs, BOOTSTRAP, B, alpha, seed, workers)


# ---------------------------------------------------------------------------
# Exact resampling distribution (toy sizes only)
# ---------------------------------------------------------------------------


class ResamplingDistribution:
    """Empirical distribution of ``n * dHSIC`` over every map in a family."""

    def __init__(self, values):
        self.values = np.sort(np.asarray(values, dtype=np.float64))

    @property
    def size(self) -> int:
        return self.values.size

    def cdf(self, t) -> np.ndarray | float:
        """``R(t) = #{T_psi <= t} / M``."""
        out = np.searchsorted(self.values, t, side="right") / self.size
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, q: float) -> float:
        """Generalized inverse ``inf{t : R(t) >= q}`` for ``q`` in (0, 1)."""
        if not 0.0 < q < 1.0:
            raise InputError("q must lie in (0, 1)")
        k = math.ceil(q * self.size - 1e-12)
        return float(self.values[max(k, 1) - 1])

    def test(self, t_obs: float, alpha: float) -> bool:
        """Exact resampling test: reject iff ``T > R^{-1}(1 - alpha)``."""
        return bool(t_obs > self.inverse(1.0 - alpha))


def _all_maps(n: int, d: int, kind: str):
    if kind == PERMUTATION:
        single = list(itertools.permutations(range(n)))
    elif kind == BOOTSTRAP:
        single = list(itertools.product(range(n), repeat=n))
    else:
        raise InputError(f"unknown resampling kind {kind!r}")
    for combo in itertools.product(single, repeat=d):
        yield ResampleMap(np.array(combo), kind)


def exact_resampling_distribution(
    dataset: Dataset,
    specs: Sequence[KernelSpec] | None = None,
    kind: str = PERMUTATION,
    grams: GramStack | None = None,
) -> ResamplingDistribution:
    """Enumerate every map of the family; at most 10,000 maps.

    Raises
    ------
    TooLarge
        If ``(n!)^d`` (permutation) or ``n^(n d)`` (bootstrap) exceeds the budget.
    """
    n, d = dataset.n, dataset.d
    count = math.factorial(n) ** d if kind == PERMUTATION else n ** (n * d)
    if count > ENUMERATION_BUDGET:
        raise TooLarge(f"{count} maps exceed the enumeration budget of {ENUMERATION_BUDGET}")
    if grams is None:
        grams = gram_stack(dataset, specs)
    return ResamplingDistribution([dhsic_statistic(grams.reindex(psi.maps)).scaled for psi in _all_maps(n, d, kind)])
