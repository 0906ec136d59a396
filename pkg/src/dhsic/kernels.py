"""Kernels, the median heuristic and Gram matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import DISCRETE, Dataset
from .errors import DegenerateSample, DimensionMismatch, InputError

GAUSSIAN = "gaussian"
MEDIAN = "median"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice for one variable.

    ``kind`` is ``"gaussian"`` or ``"discrete"``. For the Gaussian kernel
    ``bandwidth`` is either a positive float or ``"median"``; the discrete
    (indicator) kernel takes no bandwidth.
    """

    kind: str = GAUSSIAN
    bandwidth: float | str | None = MEDIAN

    def __post_init__(self):
        if self.kind == GAUSSIAN:
            if self.bandwidth is None:
                object.__setattr__(self, "bandwidth", MEDIAN)
            elif isinstance(self.bandwidth, str):
                if self.bandwidth != MEDIAN:
                    raise InputError(f"unknown bandwidth rule {self.bandwidth!r}")
            else:
                sigma = float(self.bandwidth)
                if not (sigma > 0 and math.isfinite(sigma)):
                    raise InputError(f"bandwidth must be positive, got {self.bandwidth}")
                object.__setattr__(self, "bandwidth", sigma)
        elif self.kind == DISCRETE:
            if self.bandwidth not in (None, MEDIAN):
                raise InputError("the discrete kernel takes no bandwidth")
            object.__setattr__(self, "bandwidth", None)
        else:
            raise InputError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, bandwidth: float | str = MEDIAN) -> "KernelSpec":
        return cls(GAUSSIAN, bandwidth)

    @classmethod
    def discrete(cls) -> "KernelSpec":
        return cls(DISCRETE, None)

    @property
    def is_median(self) -> bool:
        return self.kind == GAUSSIAN and self.bandwidth == MEDIAN


def default_specs(dataset: Dataset) -> list:
    """Gaussian/median kernel for continuous groups, indicator for discrete."""
    return [KernelSpec.discrete() if k == DISCRETE else KernelSpec.gaussian() for k in dataset.kinds]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def sq_distances(x) -> np.ndarray:
    """Pairwise squared Euclidean distances of the rows of ``x``.

    Computed from explicit coordinate differences (not the ``|a|^2 + |b|^2 -
    2ab`` expansion) so the result is exactly symmetric with a zero diagonal.
    """
    x = _as_points(x)
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def median_bandwidth(points) -> float:
    """Median heuristic: ``2 sigma^2 = median{|x_i - x_j|^2 : i < j}``.

    An even number of pairs uses the mean of the two middle values.

    Raises
    ------
    DegenerateSample
        If fewer than two points are given or every pair coincides.
    """
    x = _as_points(points)
    n = x.shape[0]
    if n < 2:
        raise DegenerateSample("median heuristic needs at least two points")
    iu = np.triu_indices(n, k=1)
    med = float(np.median(sq_distances(x)[iu]))
    if not med > 0:
        raise DegenerateSample("median pairwise distance is zero; bandwidth undefined")
    return math.sqrt(med / 2.0)


def resolve_bandwidth(block, spec: KernelSpec) -> float | None:
    """Concrete bandwidth for ``spec`` on ``block`` (``None`` for discrete)."""
    if spec.kind == DISCRETE:
        return None
    if spec.is_median:
        return median_bandwidth(block)
    return float(spec.bandwidth)


def freeze(block, spec: KernelSpec) -> KernelSpec:
    """Replace a median rule by the fixed bandwidth it yields on ``block``."""
    if spec.is_median:
        return KernelSpec.gaussian(median_bandwidth(block))
    return spec


def kernel_value(x, y, spec: KernelSpec) -> float:
    """Evaluate ``k(x, y)`` for a single pair; ``spec`` must be frozen."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if spec.kind == DISCRETE:
        return 1.0 if np.array_equal(x, y) else 0.0
    if spec.is_median:
        raise InputError("kernel_value needs a fixed bandwidth")
    sigma = float(spec.bandwidth)
    return math.exp(-float(np.sum((x - y) ** 2)) / (2.0 * sigma * sigma))


def gram(block, spec: KernelSpec) -> np.ndarray:
    """Gram matrix ``K[i, j] = k(x_i, x_j)`` of the rows of ``block``.

    The discrete kernel compares rows for exact numeric equality.
    """
    x = _as_points(block)
    if spec.kind == DISCRETE:
        return np.all(x[:, None, :] == x[None, :, :], axis=2).astype(np.float64)
    sigma = resolve_bandwidth(x, spec)
    return np.exp(sq_distances(x) / (-2.0 * sigma * sigma))


@dataclass(frozen=True, eq=False)
class GramStack:
    """The ``d`` Gram matrices of a dataset plus the kernels that built them.

    ``specs`` are frozen: median rules have been replaced by the bandwidth
    they produced, so the same kernels can be reused on resampled data.
    """

    matrices: tuple
    specs: tuple = ()

    def __post_init__(self):
        mats = tuple(np.asarray(k, dtype=np.float64) for k in self.matrices)
        shapes = {k.shape for k in mats}
        if len(shapes) > 1 or any(len(s) != 2 or s[0] != s[1] for s in shapes):
            raise DimensionMismatch(f"Gram matrices must share one square shape, got {sorted(shapes)}")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "specs", tuple(self.specs))

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0

    @property
    def d(self) -> int:
        return len(self.matrices)

    @property
    def bandwidths(self) -> list:
        return [s.bandwidth for s in self.specs]

    def __len__(self):
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, j):
        return self.matrices[j]

    def reindex(self, maps) -> "GramStack":
        """Gram matrices of the resampled data ``x^j_{psi^j(i)}``.

        Uses ``K[psi][:, psi]``, which equals rebuilding the Gram matrix on
        the reindexed rows with the same (frozen) kernel.
        """
        mats = tuple(k[np.ix_(m, m)] for k, m in zip(self.matrices, maps))
        return GramStack(mats, self.specs)


def gram_stack(dataset: Dataset, specs: Sequence[KernelSpec] | None = None) -> GramStack:
    """Gram matrices of every variable, with median bandwidths frozen."""
    if specs is None:
        specs = default_specs(dataset)
    if len(specs) != dataset.d:
        raise DimensionMismatch(f"got {len(specs)} kernel specs for {dataset.d} variables")
    frozen = [freeze(dataset.block(j), s) for j, s in enumerate(specs)]
    mats = [gram(dataset.block(j), s) for j, s in enumerate(frozen)]
    return GramStack(tuple(mats), tuple(frozen))
