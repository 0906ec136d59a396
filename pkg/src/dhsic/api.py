"""One entry point for every joint independence test in the package."""

from __future__ import annotations

from typing import Sequence

from .baselines import GAMMA, BmrConfig, PairwiseConfig, bmr_test, pairwise_hsic_test
from .dataset import Dataset
from .errors import InputError
from .gamma_approx import gamma_test
from .kernels import KernelSpec
from .resampling import BOOTSTRAP, DEFAULT_B, PERMUTATION, TestOutcome, dhsic_resampling_test

BMR = "bmr"
PAIRWISE = "pairwise"
METHODS = (PERMUTATION, BOOTSTRAP, GAMMA, BMR, PAIRWISE)


def independence_test(
    dataset: Dataset,
    method: str = PERMUTATION,
    specs: Sequence[KernelSpec] | None = None,
    alpha: float = 0.05,
    B: int = DEFAULT_B,
    seed: int = 0,
    C: int | None = None,
    workers: int = 1,
) -> TestOutcome:
    """Test ``H0: the d variables of dataset are jointly independent``.

    Parameters
    ----------
    method : {"permutation", "bootstrap", "gamma", "bmr", "pairwise"}
        The permutation test is the only one with a finite-sample level
        guarantee and is the default.
    specs : sequence of KernelSpec, optional
        One kernel per variable (dHSIC methods only). Defaults to Gaussian
        with the median heuristic for continuous variables and the
        indicator kernel for discrete ones.
    C : int, optional
        Number of evaluation points for ``bmr`` (defaults to ``n``).
    workers : int
        Threads for the resampled statistics; results do not depend on it.
    """
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if method != GAMMA and B < 1:
        raise InputError("B must be at least 1")
    if method in (PERMUTATION, BOOTSTRAP):
        return dhsic_resampling_test(dataset, specs, method, B, alpha, seed, workers)
    if method == GAMMA:
        return gamma_test(dataset, specs, alpha)
    if method == BMR:
        return bmr_test(dataset, BmrConfig(C=C, alpha=alpha, B=B, seed=seed, workers=workers))
    return pairwise_hsic_test(dataset, PairwiseConfig(alpha=alpha, B=B, seed=seed, workers=workers))
