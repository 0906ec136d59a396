"""The dHSIC V-estimator and brute-force reference implementations."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, TooLarge
from .kernels import GramStack, KernelSpec, default_specs, freeze, gram_stack, kernel_value

NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class DhsicValue:
    dhsic: float
    n: int

    @property
    def scaled(self) -> float:
        """The test statistic ``n * dHSIC``."""
        return self.n * self.dhsic


def _as_stack(grams) -> GramStack:
    return grams if isinstance(grams, GramStack) else GramStack(tuple(grams))


def dhsic_statistic(grams) -> DhsicValue:
    """dHSIC V-estimator from a stack of Gram matrices in ``O(d n^2)``.

    Evaluates

        sum(K^1 * ... * K^d) / n^2
        + prod_j sum(K^j) / n^2
        - 2/n * sum_i prod_j rowsum(K^j)_i / n

    and returns 0 when ``n < 2d``. Round-off negatives down to ``-1e-12`` are
    clamped to 0.

    Parameters
    ----------
    grams : GramStack or sequence of (n, n) arrays

    Returns
    -------
    DhsicValue
    """
    stack = _as_stack(grams)
    d, n = stack.d, stack.n
    if d < 2:
        raise DimensionMismatch(f"dHSIC needs at least 2 variables, got {d}")
    if n < 2 * d:
        return DhsicValue(0.0, n)
    nn = float(n * n)
    term1 = np.ones((n, n))
    term2 = 1.0
    term3 = np.ones(n)
    for k in stack.matrices:
        term1 = term1 * k
        term2 = term2 * (k.sum() / nn)
        term3 = term3 * (k.sum(axis=0) / n)
    value = term1.sum() / nn + term2 - 2.0 * term3.mean()
    if -NEGATIVE_TOL <= value < 0.0:
        value = 0.0
    return DhsicValue(float(value), n)


def dhsic(dataset: Dataset, specs: Sequence[KernelSpec] | None = None) -> DhsicValue:
    """Build the Gram matrices of ``dataset`` and evaluate the estimator."""
    return dhsic_statistic(gram_stack(dataset, specs))


def hsic2_trace_form(K, L) -> float:
    """Biased two-variable HSIC, ``trace(K H L H) / n^2``.

    ``H = I - 11^T / n`` is the centering matrix. Independent of the dHSIC
    code path; with ``d = 2`` both agree up to round-off.
    """
    K = np.asarray(K, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if K.shape != L.shape or K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionMismatch(f"need two square matrices of equal size, got {K.shape} and {L.shape}")
    n = K.shape[0]
    H = np.eye(n) - np.full((n, n), 1.0 / n)
    return float(np.trace(K @ H @ L @ H) / (n * n))


# ---------------------------------------------------------------------------
# Core-function oracle
# ---------------------------------------------------------------------------

ORACLE_MAX_N = 8
ORACLE_MAX_D = 3


def _pair_tables(dataset: Dataset, specs) -> list:
    """Kernel values of every pair, one scalar ``kernel_value`` call each."""
    tables = []
    for j, spec in enumerate(specs):
        x = dataset.block(j)
        n = x.shape[0]
        t = np.empty((n, n))
        for a in range(n):
            for b in range(n):
                t[a, b] = kernel_value(x[a], x[b], spec)
        tables.append(t)
    return tables


def _bracket(tables, idx) -> np.ndarray:
    """The three-term bracket of the core function ``h`` for index tuples.

    ``idx`` has shape ``(..., 2d)``; positions are 0-based so that
    ``(pi(1), pi(2))`` is ``idx[..., 0], idx[..., 1]``.
    """
    d = len(tables)
    first = np.ones(idx.shape[:-1])
    paired = np.ones(idx.shape[:-1])
    star = np.ones(idx.shape[:-1])
    for j, t in enumerate(tables):
        first = first * t[idx[..., 0], idx[..., 1]]
        paired = paired * t[idx[..., 2 * j], idx[..., 2 * j + 1]]
        star = star * t[idx[..., 0], idx[..., j + 1]]
    return first + paired - 2.0 * star


def core_h(tables, tup) -> float:
    """Symmetrised core function ``h(z_{t_1}, ..., z_{t_2d})``.

    Averages the bracket over all ``(2d)!`` orderings of ``tup``. ``tables``
    are the per-variable kernel tables indexed by observation number.
    """
    tup = np.asarray(tup)
    perms = np.array(list(itertools.permutations(range(tup.size))))
    return float(_bracket(tables, tup[perms]).mean())


def core_h_vstat(dataset: Dataset, specs: Sequence[KernelSpec] | None = None, literal: bool = False) -> float:
    """Brute-force V-statistic of the core function ``h``.

    Enumerates every index tuple in ``{1..n}^{2d}``. Since the tuple set is
    closed under reordering, averaging ``h`` over it equals averaging the
    unsymmetrised bracket, which is what is summed unless ``literal`` is set
    (then each tuple gets the full ``(2d)!`` permutation average).

    Kernel values come from scalar ``kernel_value`` calls, not from Gram
    matrix code, so this is an independent check of :func:`dhsic_statistic`.

    Raises
    ------
    TooLarge
        If ``n > 8``, ``d > 3`` or ``n < 2d``.
    """
    if specs is None:
        specs = default_specs(dataset)
    n, d = dataset.n, dataset.d
    if n < 2 * d:
        raise TooLarge(f"oracle requires n >= 2d (n={n}, d={d})")
    if n > ORACLE_MAX_N or d > ORACLE_MAX_D:
        raise TooLarge(f"oracle limited to n <= {ORACLE_MAX_N}, d <= {ORACLE_MAX_D} (n={n}, d={d})")
    if literal and math.factorial(2 * d) * n ** (2 * d) > 2_000_000:
        raise TooLarge("literal permutation average exceeds the enumeration budget")
    frozen = [freeze(dataset.block(j), s) for j, s in enumerate(specs)]
    tables = _pair_tables(dataset, frozen)
    idx = np.indices((n,) * (2 * d)).reshape(2 * d, -1).T
    if literal:
        perms = np.array(list(itertools.permutations(range(2 * d))))
        total = sum(float(_bracket(tables, idx[:, p]).sum()) for p in perms) / len(perms)
    else:
        total = float(_bracket(tables, idx).sum())
    return total / n ** (2 * d)
