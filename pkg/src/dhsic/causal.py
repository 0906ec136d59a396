"""DAG verification with additive noise models.

For a candidate DAG each node is regressed on its parents and the residual
vector is tested for joint independence. Under an additive noise model the
correct DAG (or a supergraph) leaves jointly independent residuals, so
ranking candidate DAGs by p-value points to the data-generating structure.

The regression is kernel ridge regression with an additive Gaussian kernel
(one median-heuristic bandwidth per parent), and the ridge penalty is picked
by exact leave-one-out cross-validation over a fixed log grid.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import CONTINUOUS, Dataset
from .errors import InputError, ParseError, SingularSystem, UnsupportedData
from .kernels import median_bandwidth, sq_distances
from .resampling import DEFAULT_B, PERMUTATION, TestOutcome

RIDGE_GRID = tuple(10.0 ** k for k in range(-6, 2))
MAX_ENUMERATE_D = 4


# ---------------------------------------------------------------------------
# DAGs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DagSpec:
    """Parent sets of ``d`` nodes (0-based indices)."""

    parents: tuple

    def __post_init__(self):
        parents = tuple(tuple(sorted(set(int(p) for p in ps))) for ps in self.parents)
        object.__setattr__(self, "parents", parents)
        d = len(parents)
        for j, ps in enumerate(parents):
            for p in ps:
                if not 0 <= p < d:
                    raise InputError(f"parent {p + 1} of node {j + 1} is not a node of a {d}-node DAG")
                if p == j:
                    raise InputError(f"node {j + 1} lists itself as a parent")
        self.topological_order()

    @property
    def d(self) -> int:
        return len(self.parents)

    @classmethod
    def empty(cls, d: int) -> "DagSpec":
        return cls(((),) * d)

    @classmethod
    def from_edges(cls, d: int, edges: Iterable) -> "DagSpec":
        """Build from ``(parent, child)`` pairs with 0-based indices."""
        parents = [set() for _ in range(d)]
        for a, b in edges:
            if not (0 <= a < d and 0 <= b < d):
                raise InputError(f"edge ({a + 1}, {b + 1}) refers to a node outside 1..{d}")
            parents[b].add(a)
        return cls(tuple(tuple(p) for p in parents))

    @property
    def edges(self) -> list:
        return [(p, j) for j, ps in enumerate(self.parents) for p in ps]

    def topological_order(self) -> list:
        remaining = {j: set(ps) for j, ps in enumerate(self.parents)}
        order = []
        while remaining:
            ready = sorted(j for j, ps in remaining.items() if not ps)
            if not ready:
                raise InputError("graph contains a directed cycle")
            for j in ready:
                order.append(j)
                del remaining[j]
            for ps in remaining.values():
                ps.difference_update(ready)
        return order

    def __str__(self):
        if not self.edges:
            return "empty"
        return ", ".join(f"{a + 1}->{b + 1}" for a, b in self.edges)


def enumerate_dags(d: int) -> list:
    """All DAGs on ``d`` labelled nodes (1, 3, 25, 543 for d = 1..4)."""
    if d < 1:
        raise InputError("d must be at least 1")
    if d > MAX_ENUMERATE_D:
        raise InputError(f"full enumeration is limited to d <= {MAX_ENUMERATE_D}; supply a DAG list")
    pairs = list(itertools.combinations(range(d), 2))
    out = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), c in zip(pairs, choice):
            if c == 1:
                edges.append((a, b))
            elif c == 2:
                edges.append((b, a))
        try:
            out.append(DagSpec.from_edges(d, edges))
        except InputError:
            continue
    return out


def parse_dags(text: str, d: int | None = None) -> list:
    """Parse the edge-list format.

    One ``parent child`` pair per line with 1-based node indices; blank lines
    separate DAGs; ``#`` starts a comment. A block holding only comments
    stands for the empty DAG. ``d`` defaults to the largest index seen.
    """
    blocks, current, has_content = [], [], False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not raw.strip():
            if has_content:
                blocks.append(current)
            current, has_content = [], False
            continue
        has_content = True
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("expected 'parent child'", row=lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError("node indices must be integers", row=lineno) from None
        if a < 1 or b < 1:
            raise ParseError("node indices are 1-based", row=lineno)
        current.append((a - 1, b - 1))
    if has_content:
        blocks.append(current)
    if d is None:
        d = max((max(a, b) + 1 for blk in blocks for a, b in blk), default=0)
    return [DagSpec.from_edges(d, blk) for blk in blocks]


def format_dags(dags: Sequence[DagSpec]) -> str:
    """Inverse of :func:`parse_dags`."""
    chunks = []
    for dag in dags:
        lines = [f"{a + 1} {b + 1}" for a, b in dag.edges] or ["# empty"]
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionConfig:
    ridge_grid: tuple = RIDGE_GRID


class KernelRidgeLOO:
    """Kernel ridge regression with an additive Gaussian kernel.

    The penalty is ``lam * n`` with ``lam`` chosen from ``grid`` by exact
    leave-one-out error, computed in closed form from one eigendecomposition
    of the training Gram matrix.
    """

    def __init__(self, grid: Sequence[float] = RIDGE_GRID):
        self.grid = tuple(grid)

    def _kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.zeros((a.shape[0], b.shape[0]))
        for c, sigma in enumerate(self.bandwidths_):
            diff = a[:, c][:, None] - b[:, c][None, :]
            out += np.exp(diff * diff / (-2.0 * sigma * sigma))
        return out

    def fit(self, X, y) -> "KernelRidgeLOO":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = X.shape[0]
        self.X_ = X
        self.intercept_ = float(y.mean())
        yc = y - self.intercept_
        self.bandwidths_ = [median_bandwidth(X[:, c]) for c in range(X.shape[1])]
        K = self._kernel(X, X)
        try:
            w, U = np.linalg.eigh(K)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"eigendecomposition of the training Gram matrix failed: {exc}") from exc
        w = np.clip(w, 0.0, None)
        Uy = U.T @ yc
        best = None
        for lam in self.grid:
            shrink = w / (w + lam * n)
            fitted = U @ (shrink * Uy)
            hat_diag = np.einsum("ij,j,ij->i", U, shrink, U)
            denom = 1.0 - hat_diag
            if np.any(denom <= 1e-12):
                continue
            loo = float(np.mean(((yc - fitted) / denom) ** 2))
            if math.isfinite(loo) and (best is None or loo < best[0]):
                best = (loo, lam)
        if best is None:
            raise SingularSystem("leave-one-out error undefined at every ridge penalty")
        self.loo_error_, self.ridge_ = best
        self.dual_coef_ = U @ (Uy / (w + self.ridge_ * n))
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self._kernel(X, self.X_) @ self.dual_coef_ + self.intercept_


def regress_node(
    dataset: Dataset,
    node: int,
    parents: Sequence[int],
    reg_config: RegressionConfig | None = None,
    train_rows=None,
    eval_rows=None,
) -> np.ndarray:
    """Residuals of ``node`` after regressing it on ``parents``.

    The regression is fitted on ``train_rows`` and residuals are returned for
    ``eval_rows`` (both default to all rows). Without parents the residuals
    are the column centred at its training mean.
    """
    reg_config = reg_config or RegressionConfig()
    x = _node_matrix(dataset)
    all_rows = np.arange(dataset.n)
    train = all_rows if train_rows is None else np.asarray(train_rows)
    test = all_rows if eval_rows is None else np.asarray(eval_rows)
    y_train, y_test = x[train, node], x[test, node]
    parents = list(parents)
    if not parents:
        return y_test - y_train.mean()
    model = KernelRidgeLOO(reg_config.ridge_grid).fit(x[np.ix_(train, parents)], y_train)
    return y_test - model.predict(x[np.ix_(test, parents)])


def _node_matrix(dataset: Dataset) -> np.ndarray:
    if any(g.size != 1 for g in dataset.groups) or any(k != CONTINUOUS for k in dataset.kinds):
        raise UnsupportedData("DAG verification needs one continuous column per node")
    return dataset.values[:, np.concatenate(dataset.groups)]


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodConfig:
    """Which joint independence test to run on the residuals."""

    method: str = PERMUTATION
    alpha: float = 0.05
    B: int = DEFAULT_B
    C: int | None = None
    seed: int = 0
    workers: int = 1


@dataclass
class DagReport:
    dag: DagSpec
    p_value: float
    outcome: TestOutcome
    residual_variance: list
    split: bool
    train_rows: np.ndarray | None = None
    eval_rows: np.ndarray | None = None
    index: int | None = None
    notes: list = field(default_factory=list)

    @property
    def ranking_only(self) -> bool:
        """Without sample splitting p-values only order DAGs; no level."""
        return not self.split

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "dag": str(self.dag),
            "edges": [[a + 1, b + 1] for a, b in self.dag.edges],
            "p_value": self.p_value,
            "statistic": self.outcome.statistic,
            "method": self.outcome.method,
            "B": self.outcome.B,
            "alpha": self.outcome.alpha,
            "seed": self.outcome.seed,
            "residual_variance": self.residual_variance,
            "split": self.split,
            "ranking_only": self.ranking_only,
        }


def residuals(dataset: Dataset, dag: DagSpec, split: bool = False, reg_config: RegressionConfig | None = None):
    """Residual matrix for ``dag`` plus the training and evaluation rows.

    With ``split`` the regressions are fitted on the first half of the rows
    and residuals are computed on the second half.
    """
    n = dataset.n
    if dag.d != dataset.d:
        raise InputError(f"DAG has {dag.d} nodes but the data has {dataset.d} variables")
    if split:
        half = n // 2
        if half < 4 or n - half < 4:
            raise InputError("sample splitting needs at least 4 rows per half")
        train, test = np.arange(half), np.arange(half, n)
    else:
        train = test = np.arange(n)
    cols = [regress_node(dataset, j, dag.parents[j], reg_config, train, test) for j in range(dag.d)]
    return np.column_stack(cols), train, test


def dag_verify(
    dataset: Dataset,
    dag: DagSpec,
    test_config: MethodConfig = MethodConfig(),
    split: bool = False,
    reg_config: RegressionConfig | None = None,
) -> DagReport:
    """Regress every node on its parents and test the residuals for joint
    independence.

    Without ``split`` the residuals are dependent through the fitted
    functions and the p-value is only meaningful for ranking DAGs.
    """
    from .api import independence_test

    res, train, test = residuals(dataset, dag, split, reg_config)
    res_data = Dataset.from_blocks(list(res.T))
    outcome = independence_test(
        res_data,
        method=test_config.method,
        alpha=test_config.alpha,
        B=test_config.B,
        C=test_config.C,
        seed=test_config.seed,
        workers=1,
    )
    notes = [] if split else ["ranking-only: no sample splitting, p-value has no level guarantee"]
    return DagReport(
        dag=dag,
        p_value=outcome.p_value,
        outcome=outcome,
        residual_variance=[float(v) for v in res.var(axis=0)],
        split=split,
        train_rows=train,
        eval_rows=test,
        notes=notes,
    )


def dag_rank(
    dataset: Dataset,
    dags: Sequence[DagSpec],
    test_config: MethodConfig = MethodConfig(),
    split: bool = False,
    reg_config: RegressionConfig | None = None,
    workers: int = 1,
) -> list:
    """Verify every DAG and sort by descending p-value (ties by list index)."""
    dags = list(dags)
    if not dags:
        raise InputError("need at least one candidate DAG")

    def one(i):
        rep = dag_verify(dataset, dags[i], test_config, split, reg_config)
        rep.index = i
        return rep

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(len(dags))))
    else:
        reports = [one(i) for i in range(len(dags))]
    return sorted(reports, key=lambda r: (-r.p_value, r.index))
