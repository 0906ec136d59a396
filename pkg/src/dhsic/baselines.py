"""Competing tests: the BMR-C sup-statistic test and pairwise HSIC with a
Bonferroni correction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import CONTINUOUS, Dataset
from .errors import InputError, UnsupportedData
from .gamma_approx import gamma_test
from .kernels import KernelSpec
from .resampling import (
    BOOTSTRAP,
    DEFAULT_B,
    PERMUTATION,
    TestOutcome,
    derive_seed,
    dhsic_resampling_test,
    monte_carlo_test,
    resample_apply,
)

GAMMA = "gamma"


@dataclass(frozen=True)
class BmrConfig:
    """``C`` random evaluation points (``None`` means ``C = n``)."""

    C: int | None = None
    alpha: float = 0.05
    B: int = DEFAULT_B
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.C is not None and self.C < 1:
            raise InputError("C must be at least 1")


@dataclass(frozen=True)
class PairwiseConfig:
    alpha: float = 0.05
    B: int = DEFAULT_B
    method: str = PERMUTATION
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.method not in (PERMUTATION, BOOTSTRAP, GAMMA):
            raise InputError(f"unknown pairwise sub-test method {self.method!r}")


def _real_columns(dataset: Dataset) -> np.ndarray:
    if any(g.size != 1 for g in dataset.groups) or any(k != CONTINUOUS for k in dataset.kinds):
        raise UnsupportedData("BMR needs one continuous real column per variable")
    return dataset.values[:, np.concatenate(dataset.groups)]


def bmr_statistic(dataset: Dataset, eval_points) -> float:
    """Largest gap between the empirical joint CDF and the product of the
    empirical marginal CDFs over the given evaluation points.

    Both CDFs count ``x <= a`` coordinatewise.
    """
    x = _real_columns(dataset)
    a = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
    if a.shape[1] != x.shape[1]:
        raise InputError(f"evaluation points have {a.shape[1]} coordinates, data has {x.shape[1]}")
    below = x[None, :, :] <= a[:, None, :]
    joint = below.all(axis=2).mean(axis=1)
    product = below.mean(axis=1).prod(axis=1)
    return float(np.abs(joint - product).max())


def bmr_eval_points(dataset: Dataset, C: int, rng: np.random.Generator) -> np.ndarray:
    """``C`` iid draws from the Gaussian fitted by maximum likelihood.

    Uses the sample mean and the full (1/n) sample covariance.
    """
    x = _real_columns(dataset)
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True)) if x.shape[0] > 1 else np.zeros((x.shape[1],) * 2)
    return rng.multivariate_normal(mean, cov, size=C, method="eigh")


def bmr_test(dataset: Dataset, config: BmrConfig = BmrConfig()) -> TestOutcome:
    """Bootstrap test on the BMR statistic.

    The evaluation points are drawn once from the original data's Gaussian
    fit and kept fixed for every bootstrap resample.
    """
    C = dataset.n if config.C is None else config.C
    points_rng = np.random.default_rng(np.random.SeedSequence([int(config.seed) & 0xFFFFFFFFFFFFFFFF, 0, 1]))
    points = bmr_eval_points(dataset, C, points_rng)
    t_obs = bmr_statistic(dataset, points)

    def stat_of_map(psi):
        return bmr_statistic(resample_apply(dataset, psi), points)

    out = monte_carlo_test(
        stat_of_map, t_obs, dataset.n, dataset.d, BOOTSTRAP, config.B, config.alpha, config.seed,
        config.workers, method="bmr",
    )
    out.details = {"C": C}
    return out


def pairwise_hsic_test(dataset: Dataset, config: PairwiseConfig = PairwiseConfig()) -> TestOutcome:
    """Sequential two-variable HSIC tests with a Bonferroni correction.

    For ``k = d, d-1, ..., 2`` variable ``k`` is tested against the
    concatenation of variables ``1..k-1`` at level ``alpha / (d - 1)``, using
    Gaussian kernels with median-heuristic bandwidths on both sides. The
    reported p-value is ``min(1, (d - 1) * min_k p_k)``.
    """
    d = dataset.d
    m = d - 1
    level = config.alpha / m
    specs = [KernelSpec.gaussian(), KernelSpec.gaussian()]
    subs = []
    for k in range(d - 1, 0, -1):
        pair = Dataset.from_blocks([np.hstack(dataset.blocks()[:k]), dataset.block(k)])
        if config.method == GAMMA:
            sub = gamma_test(pair, specs, level)
        else:
            sub = dhsic_resampling_test(
                pair, specs, config.method, config.B, level, derive_seed(config.seed, k), config.workers
            )
        subs.append(sub)
    ps = [s.p_value for s in subs]
    best = int(np.argmin(ps))
    return TestOutcome(
        method="pairwise",
        statistic=subs[best].statistic,
        p_value=min(1.0, m * ps[best]),
        crit_value=math.nan,
        reject=any(s.reject for s in subs),
        alpha=config.alpha,
        n=dataset.n,
        d=d,
        B=None if config.method == GAMMA else config.B,
        seed=config.seed,
        details={
            "sub_method": config.method,
            "sub_level": level,
            "sub_p_values": ps,
            "sub_tests": [f"X{k + 1} vs X1..X{k}" for k in range(d - 1, 0, -1)],
        },
    )
