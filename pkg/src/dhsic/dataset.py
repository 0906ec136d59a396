"""Grouped numeric data: an ``n x p`` matrix split into ``d`` variables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, GroupSpecError, NonIntegerDiscrete

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations of ``d`` (possibly multivariate) variables.

    Parameters
    ----------
    values : (n, p) ndarray
        Observations in rows.
    groups : sequence of int arrays
        Zero-based column indices of each variable. Must partition
        ``range(p)``.
    kinds : sequence of {"continuous", "discrete"}
        One tag per group. Discrete groups must hold integer values.
    """

    values: np.ndarray
    groups: tuple
    kinds: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionMismatch("values must be a 2-d array")
        groups = tuple(np.asarray(g, dtype=np.intp).reshape(-1) for g in self.groups)
        kinds = tuple(self.kinds) if self.kinds is not None else (CONTINUOUS,) * len(groups)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "kinds", kinds)
        self._validate()

    def _validate(self):
        p = self.values.shape[1]
        if len(self.groups) < 2:
            raise GroupSpecError(f"need at least 2 variables, got {len(self.groups)}")
        if len(self.kinds) != len(self.groups):
            raise GroupSpecError("one kind tag is required per group")
        seen = np.zeros(p, dtype=bool)
        for j, g in enumerate(self.groups):
            if g.size == 0:
                raise GroupSpecError(f"group {j + 1} is empty")
            if g.min() < 0 or g.max() >= p:
                raise GroupSpecError(f"group {j + 1} references a column outside 1..{p}")
            if np.unique(g).size != g.size or seen[g].any():
                raise GroupSpecError(f"group {j + 1} overlaps another group")
            seen[g] = True
        if not seen.all():
            missing = np.flatnonzero(~seen) + 1
            raise GroupSpecError(f"columns {missing.tolist()} belong to no group")
        for j, kind in enumerate(self.kinds):
            if kind not in (CONTINUOUS, DISCRETE):
                raise GroupSpecError(f"unknown kind {kind!r} for group {j + 1}")
            if kind == DISCRETE:
                block = self.values[:, self.groups[j]]
                if not np.all(np.isfinite(block)) or np.any(block != np.round(block)):
                    raise NonIntegerDiscrete(f"group {j + 1} is discrete but holds non-integer values")

    @classmethod
    def from_blocks(cls, blocks: Sequence, kinds: Sequence[str] | None = None) -> "Dataset":
        """Build a dataset by horizontally stacking one block per variable."""
        arrays = []
        for b in blocks:
            b = np.asarray(b, dtype=np.float64)
            arrays.append(b[:, None] if b.ndim == 1 else b)
        n = {a.shape[0] for a in arrays}
        if len(n) != 1:
            raise DimensionMismatch(f"blocks have different row counts: {sorted(n)}")
        groups, start = [], 0
        for a in arrays:
            groups.append(np.arange(start, start + a.shape[1]))
            start += a.shape[1]
        if kinds is None:
            kinds = (CONTINUOUS,) * len(arrays)
        return cls(np.hstack(arrays), tuple(groups), tuple(kinds))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return len(self.groups)

    def block(self, j: int) -> np.ndarray:
        """Columns of variable ``j`` as an ``(n, m_j)`` array."""
        return self.values[:, self.groups[j]]

    def blocks(self) -> list:
        return [self.block(j) for j in range(self.d)]

    def take_rows(self, rows) -> "Dataset":
        return Dataset(self.values[np.asarray(rows)], self.groups, self.kinds)

    def equals(self, other: "Dataset") -> bool:
        """Exact equality of values, grouping and kinds."""
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and len(self.groups) == len(other.groups)
            and all(np.array_equal(a, b) for a, b in zip(self.groups, other.groups))
            and self.kinds == other.kinds
        )
