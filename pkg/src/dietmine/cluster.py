"""k-means, X-Means model selection and cluster characterization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

from .labeling import DayLabel, UserLabel

MAX_LLOYD_ITERATIONS = 100


class ClusterError(ValueError):
    pass


@dataclass
class ClusterModel:
    centroids: np.ndarray
    assignment: np.ndarray
    wcss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()

    @property
    def wcss(self) -> float:
        return self.wcss_history[-1] if self.wcss_history else float("nan")


def _sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _wcss(X: np.ndarray, C: np.ndarray, assign: np.ndarray) -> float:
    return float(((X - C[assign]) ** 2).sum())


def kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding."""
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = _sq_distances(X, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, _sq_distances(X, X[idx][None, :])[:, 0])
    return np.array(centers, dtype=float)


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = MAX_LLOYD_ITERATIONS) -> ClusterModel:
    """Lloyd iterations from ``centers`` until the assignment stops changing.

    Ties in the argmin go to the lowest cluster id.  A cluster that loses
    all its points is re-seeded with the point farthest from its current
    centroid.
    """
    C = np.array(centers, dtype=float)
    k = len(C)
    assign = np.argmin(_sq_distances(X, C), axis=1)
    history = [_wcss(X, C, assign)]
    for _ in range(max_iter):
        for _ in range(k):
            counts = np.bincount(assign, minlength=k)
            empty = np.flatnonzero(counts == 0)
            if not len(empty):
                break
            far = int(np.argmax(((X - C[assign]) ** 2).sum(1)))
            C[empty[0]] = X[far]
            assign[far] = empty[0]
        for j in range(k):
            members = assign == j
            if members.any():
                C[j] = X[members].mean(0)
        history.append(_wcss(X, C, assign))
        new = np.argmin(_sq_distances(X, C), axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
        history.append(_wcss(X, C, assign))
    return ClusterModel(C, assign, history)


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = MAX_LLOYD_ITERATIONS) -> ClusterModel:
    X = np.asarray(X, dtype=float)
    if k < 1:
        raise ClusterError("k must be >= 1")
    distinct = len(np.unique(X, axis=0)) if len(X) else 0
    if k > distinct:
        raise ClusterError(f"k={k} exceeds the {distinct} distinct vectors")
    rng = np.random.default_rng(seed)
    return lloyd(X, kmeans_pp(X, k, rng), max_iter)


def bic(X: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> float:
    """Spherical-Gaussian BIC of a hard clustering (Pelleg & Moore's X-Means form).

    One variance shared by all clusters, estimated per dimension as
    ``sum |x - mu|^2 / (M (R - K))``; parameters counted as ``K - 1``
    mixing weights, ``K M`` coordinates and one variance.
    """
    R, M = X.shape
    K = len(centers)
    if R <= K:
        return -math.inf
    sse = _wcss(X, centers, assign)
    var = max(sse / (M * (R - K)), 1e-300)
    sizes = np.bincount(assign, minlength=K)
    loglik = 0.0
    for Rn in sizes:
        if Rn == 0:
            continue
        loglik += (
            -Rn / 2.0 * math.log(2 * math.pi)
            - Rn * M / 2.0 * math.log(var)
            - (Rn - K) / 2.0
            + Rn * math.log(Rn)
            - Rn * math.log(R)
        )
    params = (K - 1) + M * K + 1
    return loglik - params / 2.0 * math.log(R)


def _split_seeds(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Two seeds offset from ``center`` along the axis through its two farthest members."""
    a = points[int(np.argmax(((points - center) ** 2).sum(1)))]
    b = points[int(np.argmax(((points - a) ** 2).sum(1)))]
    offset = (b - a) / 4.0
    return np.array([center - offset, center + offset])


@dataclass(frozen=True)
class SplitDecision:
    round: int
    cluster: int
    size: int
    parent_bic: float
    child_bic: float

    @property
    def accepted(self) -> bool:
        return self.child_bic > self.parent_bic


def xmeans(
    X: np.ndarray,
    k_min: int = 2,
    k_max: int = 10,
    seed: int = 0,
    max_iter: int = MAX_LLOYD_ITERATIONS,
    trace: list[SplitDecision] | None = None,
) -> ClusterModel:
    """X-Means: grow k from ``k_min`` by BIC-approved two-way splits.

    Each round every cluster is tentatively split with a local 2-means; a
    split is kept when the children's BIC over the cluster's points beats
    the parent's.  When more splits qualify than ``k_max`` allows, the
    largest BIC gains win.  Kept splits seed a global Lloyd refinement.
    Stops when a round accepts nothing or ``k_max`` is reached.
    """
    X = np.asarray(X, dtype=float)
    if k_min > k_max:
        raise ClusterError(f"k_min={k_min} > k_max={k_max}")
    model = kmeans(X, k_min, seed, max_iter)
    rnd = 0
    while model.k < k_max:
        rnd += 1
        gains: list[tuple[float, int, np.ndarray]] = []
        for c in range(model.k):
            pts = X[model.assignment == c]
            if len(pts) < 3 or len(np.unique(pts, axis=0)) < 2:
                continue
            center = pts.mean(0)[None, :]
            parent = bic(pts, center, np.zeros(len(pts), dtype=int))
            local = lloyd(pts, _split_seeds(pts, center[0]), max_iter)
            if min(local.sizes) == 0:
                continue
            child = bic(pts, local.centroids, local.assignment)
            if trace is not None:
                trace.append(SplitDecision(rnd, c, len(pts), parent, child))
            if child > parent:
                gains.append((child - parent, c, local.centroids))
        if not gains:
            break
        gains.sort(key=lambda g: (-g[0], g[1]))
        chosen = {c: cents for _, c, cents in gains[: k_max - model.k]}
        centers = []
        for c in range(model.k):
            if c in chosen:
                centers.extend(chosen[c])
            else:
                centers.append(model.centroids[c])
        model = lloyd(X, np.array(centers), max_iter)
    return model


# -- characterization -------------------------------------------------------


def rank_order(means: np.ndarray, names: Sequence[str]) -> dict[str, int]:
    """Rank 1 = largest mean; ties broken by name."""
    order = sorted(range(len(names)), key=lambda i: (-means[i], names[i]))
    return {names[i]: r + 1 for r, i in enumerate(order)}


@dataclass(frozen=True)
class RankGain:
    token: str
    global_rank: int
    cluster_rank: int

    @property
    def gain(self) -> int:
        return self.global_rank - self.cluster_rank


def rank_gains(
    model: ClusterModel,
    X: np.ndarray,
    names: Sequence[str],
    rank_cap: int = 40,
    top: int = 10,
) -> list[list[RankGain]]:
    """Per cluster, tokens that climb most from the global to the within-cluster ranking.

    Rankings use each token's mean normalized weight over users (zeros
    included).  Only tokens ranked within ``rank_cap`` inside the cluster
    qualify; ties in gain go to the better cluster rank, then the name.
    """
    global_rank = rank_order(X.mean(0), names)
    out = []
    for c in range(model.k):
        members = X[model.assignment == c]
        if not len(members):
            out.append([])
            continue
        local = rank_order(members.mean(0), names)
        rows = [RankGain(t, global_rank[t], r) for t, r in local.items() if r <= rank_cap]
        rows.sort(key=lambda g: (-g.gain, g.cluster_rank, g.token))
        out.append(rows[:top])
    return out


@dataclass(frozen=True)
class Composition:
    cluster: int
    size: int
    below: int
    above: int

    def pct(self, n: int) -> int:
        labeled = self.below + self.above
        return int(round(100.0 * n / labeled)) if labeled else 0

    def cell(self) -> str:
        return f"{self.below} ({self.pct(self.below)}%) / {self.above} ({self.pct(self.above)}%)"


def cluster_composition(
    model: ClusterModel, user_ids: Sequence[str], labels: Mapping[str, UserLabel]
) -> list[Composition]:
    """Below/above tallies per cluster; users without either label are left out."""
    out = []
    for c in range(model.k):
        members = [user_ids[i] for i in np.flatnonzero(model.assignment == c)]
        below = sum(1 for u in members if u in labels and labels[u].label is DayLabel.BELOW)
        above = sum(1 for u in members if u in labels and labels[u].label is DayLabel.ABOVE)
        out.append(Composition(c + 1, len(members), below, above))
    return out


def write_cluster_report(
    compositions: Sequence[Composition], gains: Sequence[Sequence[RankGain]], stream: IO[str]
) -> None:
    for comp, rows in zip(compositions, gains):
        stream.write(f"cluster\t{comp.cluster}\tn={comp.size}\n")
        stream.write(f"below/above\t{comp.cell()}\n")
        stream.write("token\tglobal_rank\tcluster_rank\tgain\n")
        for g in rows:
            stream.write(f"{g.token}\t{g.global_rank}\t{g.cluster_rank}\t{g.gain:+d}\n")
        stream.write("\n")
