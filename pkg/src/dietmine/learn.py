"""Linear soft-margin SVM for above-vs-below prediction and its analyses.

Positive class (+1) is "above" throughout, negative (-1) is "below".
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .corpus import UserDiary
from .features import FeatureExtractor, FeatureVector, FeatureVocabulary
from .labeling import LABEL_ORDER, DayLabel, LabeledDay, UserLabel

MODEL_MAGIC = "dietmine-linear-model"
MODEL_VERSION = 1


class LearnError(ValueError):
    pass


@dataclass
class Sample:
    user_ids: list[str]
    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx: Sequence[int]) -> "Sample":
        idx = np.asarray(idx, dtype=int)
        return Sample([self.user_ids[i] for i in idx], self.X[idx], self.y[idx])


def build_sample(
    vectors: Iterable[FeatureVector],
    labels: Mapping[str, UserLabel],
    n_features: int,
) -> Sample:
    """Dense design matrix for users labeled above (+1) or below (-1)."""
    user_ids, rows, ys = [], [], []
    for v in vectors:
        lab = labels.get(v.user_id)
        if lab is None or lab.label is DayLabel.ON_TARGET:
            continue
        row = np.zeros(n_features)
        for k, val in v.values.items():
            row[k] = val
        user_ids.append(v.user_id)
        rows.append(row)
        ys.append(1.0 if lab.label is DayLabel.ABOVE else -1.0)
    X = np.array(rows) if rows else np.zeros((0, n_features))
    return Sample(user_ids, X, np.array(ys))


def balance(sample: Sample, seed: int) -> Sample:
    """Keep the minority class whole and draw as many majority rows without replacement."""
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(sample.y > 0)
    neg = np.flatnonzero(sample.y < 0)
    if len(pos) == 0 or len(neg) == 0:
        raise LearnError(f"cannot balance: {len(pos)} above and {len(neg)} below users")
    m = min(len(pos), len(neg))
    if len(pos) > m:
        pos = np.sort(rng.choice(pos, size=m, replace=False))
    if len(neg) > m:
        neg = np.sort(rng.choice(neg, size=m, replace=False))
    idx = rng.permutation(np.concatenate([pos, neg]))
    return sample.subset(idx)


# -- training ---------------------------------------------------------------


def objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def subgradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> tuple[np.ndarray, float]:
    """A subgradient of :func:`objective`; exact gradient where no margin equals 1."""
    margins = y * (X @ w + b)
    viol = margins < 1.0
    gw = w - C * (X[viol].T @ y[viol])
    gb = -C * float(y[viol].sum())
    return gw, gb


@dataclass
class LinearModel:
    feature_names: list[str]
    weights: np.ndarray
    bias: float
    C: float
    seed: int = 0
    space: str = "token"
    normalized: bool = False
    epochs: int = 0
    objective_history: list[float] = field(default_factory=list, repr=False)

    @property
    def final_objective(self) -> float:
        return self.objective_history[-1] if self.objective_history else float("nan")

    def weight_map(self) -> dict[str, float]:
        return dict(zip(self.feature_names, map(float, self.weights)))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1.0, -1.0)

    def dump(self, stream: IO[str]) -> None:
        stream.write(f"{MODEL_MAGIC}\t{MODEL_VERSION}\n")
        stream.write(f"space\t{self.space}\n")
        stream.write(f"C\t{self.C!r}\n")
        stream.write(f"seed\t{self.seed}\n")
        stream.write(f"bias\t{self.bias!r}\n")
        stream.write(f"normalized\t{str(self.normalized).lower()}\n")
        stream.write(f"epochs\t{self.epochs}\n")
        stream.write(f"objective\t{self.final_objective!r}\n")
        stream.write(f"features\t{len(self.feature_names)}\n")
        for name, wt in sorted(self.weight_map().items()):
            stream.write(f"{name}\t{wt!r}\n")

    @classmethod
    def load(cls, stream: IO[str], feature_names: Sequence[str] | None = None) -> "LinearModel":
        """Read a model file; ``feature_names`` fixes the weight order (default: file order)."""
        lines = [ln.rstrip("\n") for ln in stream]
        magic, version = lines[0].split("\t")
        if magic != MODEL_MAGIC or int(version) != MODEL_VERSION:
            raise LearnError(f"not a version {MODEL_VERSION} model file")
        head: dict[str, str] = {}
        i = 1
        while True:
            key, value = lines[i].split("\t")
            head[key] = value
            i += 1
            if key == "features":
                break
        weights = {}
        for ln in lines[i : i + int(head["features"])]:
            name, value = ln.rsplit("\t", 1)
            weights[name] = float(value)
        names = list(feature_names) if feature_names is not None else list(weights)
        return cls(
            feature_names=names,
            weights=np.array([weights.get(n, 0.0) for n in names]),
            bias=float(head["bias"]),
            C=float(head["C"]),
            seed=int(head["seed"]),
            space=head["space"],
            normalized=head["normalized"] == "true",
            epochs=int(head["epochs"]),
            objective_history=[float(head["objective"])],
        )


def default_C(X: np.ndarray) -> float:
    """SVM-light's default regularization constant, ``1 / mean(x . x)``."""
    sq = float(np.mean(np.einsum("ij,ij->i", X, X))) if len(X) else 0.0
    return 1.0 / sq if sq > 0 else 1.0


def optimal_bias(scores: np.ndarray, y: np.ndarray) -> float:
    """Minimizer over b of ``sum hinge(y (score + b))``.

    The sum is convex and piecewise linear with kinks at ``y_i - score_i``;
    its slope climbs from ``-P`` (P positives) by one at each kink, so it
    is flat between the P-th and (P+1)-th smallest kinks.  The midpoint of
    that interval is returned.
    """
    kinks = np.sort(y - scores)
    n_pos = int(np.sum(y > 0))
    if n_pos == 0:
        return float(kinks[0])
    if n_pos == len(kinks):
        return float(kinks[-1])
    return 0.5 * float(kinks[n_pos - 1] + kinks[n_pos])


def train(
    sample: Sample,
    C: float | None = None,
    seed: int = 0,
    feature_names: Sequence[str] | None = None,
    max_epochs: int = 2000,
    tol: float = 1e-6,
    window: int = 50,
    space: str = "token",
    normalized: bool = False,
) -> LinearModel:
    """Fit ``min 1/2 |w|^2 + C * sum hinge(y (w.x + b))`` by full-batch subgradient descent.

    The weights take subgradient steps on the ``1/(lambda t)`` schedule
    (``lambda = 1/(C n)``) with the Pegasos projection onto the ball of
    radius ``1/sqrt(lambda)``; after each step the bias is set to its exact
    minimizer given the weights (see :func:`optimal_bias`).  The best
    iterate seen is returned; training stops once the best objective has
    improved by less than ``tol`` (relative) over the last ``window``
    epochs, or after ``max_epochs``.

    ``C=None`` selects :func:`default_C`.  ``seed`` is recorded for
    provenance; the procedure itself is deterministic.
    """
    X, y = sample.X, sample.y
    if not np.all(np.isfinite(X)):
        raise LearnError("non-finite feature values")
    if C is None:
        C = default_C(X)
    if C <= 0:
        raise LearnError("C must be positive")
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise LearnError("labels must be +1/-1")
    n, d = X.shape
    names = list(feature_names) if feature_names is not None else [str(i) for i in range(d)]
    w = np.zeros(d)
    b = 0.0
    if n == 0:
        return LinearModel(names, w, b, C, seed, space, normalized, 0, [])
    lam = 1.0 / (C * n)
    radius = 1.0 / math.sqrt(lam)

    b = optimal_bias(X @ w, y)
    best_w, best_b = w.copy(), b
    best = objective(w, b, X, y, C)
    history = [best]
    epochs = 0
    for t in range(1, max_epochs + 1):
        epochs = t
        margins = y * (X @ w + b)
        viol = margins < 1.0
        step = C / t  # (1 / (lam t)) / n
        w = (1.0 - 1.0 / t) * w + step * (X[viol].T @ y[viol])
        norm = math.sqrt(float(w @ w))
        if norm > radius:
            w *= radius / norm
        b = optimal_bias(X @ w, y)
        obj = objective(w, b, X, y, C)
        if obj < best:
            best, best_w, best_b = obj, w.copy(), b
        history.append(best)
        if t >= window:
            past = history[-1 - window]
            if past - best <= tol * max(abs(best), 1e-300):
                break
    return LinearModel(names, best_w, best_b, C, seed, space, normalized, epochs, history)


# -- evaluation -------------------------------------------------------------


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays; each class is shuffled and dealt round-robin."""
    if len(y) < folds:
        raise LearnError(f"sample of {len(y)} is smaller than {folds} folds")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    start = 0
    for cls in (1.0, -1.0):
        idx = rng.permutation(np.flatnonzero(y == cls))
        for j, i in enumerate(idx):
            buckets[(start + j) % folds].append(int(i))
        start = (start + len(idx)) % folds
    return [np.array(sorted(b), dtype=int) for b in buckets]


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_test: int
    accuracy: float
    precision: float | None
    recall: float | None


def binary_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float | None, float | None]:
    tp = int(np.sum((y_pred > 0) & (y_true > 0)))
    fp = int(np.sum((y_pred > 0) & (y_true < 0)))
    fn = int(np.sum((y_pred < 0) & (y_true > 0)))
    acc = float(np.mean(y_pred == y_true)) if len(y_true) else float("nan")
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    return acc, precision, recall


@dataclass
class EvalReport:
    folds: list[FoldResult]

    def _values(self, metric: str) -> list[float]:
        return [getattr(f, metric) for f in self.folds if getattr(f, metric) is not None]

    def mean(self, metric: str) -> float:
        vals = self._values(metric)
        return float(np.mean(vals)) if vals else float("nan")

    def std(self, metric: str) -> float:
        """Sample standard deviation (ddof=1) across folds where the metric is defined."""
        vals = self._values(metric)
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def dump(self, stream: IO[str]) -> None:
        fmt = lambda v: "NA" if v is None else f"{100 * v:.1f}"
        stream.write("fold\tn_test\taccuracy\tprecision\trecall\n")
        for f in self.folds:
            stream.write(f"{f.fold}\t{f.n_test}\t{fmt(f.accuracy)}\t{fmt(f.precision)}\t{fmt(f.recall)}\n")
        metrics = ("accuracy", "precision", "recall")
        stream.write("mean\t\t" + "\t".join(f"{100 * self.mean(m):.1f}" for m in metrics) + "\n")
        stream.write("std\t\t" + "\t".join(f"{100 * self.std(m):.1f}" for m in metrics) + "\n")


def cross_validate(
    sample: Sample,
    folds: int = 10,
    C: float | None = None,
    seed: int = 0,
    jobs: int = 1,
    **train_kwargs,
) -> EvalReport:
    """Stratified k-fold evaluation; precision and recall treat "above" as positive."""
    test_sets = stratified_folds(sample.y, folds, seed)
    everything = np.arange(len(sample))

    def run(k: int) -> FoldResult:
        test = test_sets[k]
        trn = np.setdiff1d(everything, test)
        model = train(sample.subset(trn), C=C, seed=seed, **train_kwargs)
        part = sample.subset(test)
        acc, prec, rec = binary_metrics(part.y, model.predict(part.X))
        return FoldResult(k + 1, len(test), acc, prec, rec)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run, range(folds)))
    else:
        results = [run(k) for k in range(folds)]
    return EvalReport(results)


# -- feature analysis -------------------------------------------------------


@dataclass(frozen=True)
class RankedFeature:
    name: str
    weight: float
    example: str | None = None


def example_foods(
    corpus: Iterable[UserDiary],
    extractor: FeatureExtractor,
    names: Iterable[str] | None = None,
) -> dict[str, str]:
    """For each feature, the entry text containing it that the most distinct users logged.

    Ties go to the lexicographically smallest text.
    """
    users_per_text: dict[str, set[str]] = {}
    for diary in corpus:
        for day in diary.days:
            for e in day.entries:
                users_per_text.setdefault(e.text, set()).add(diary.user_id)
    wanted = set(names) if names is not None else None
    best: dict[str, tuple[int, str]] = {}
    for text in sorted(users_per_text):
        n = len(users_per_text[text])
        for feat in extractor.entry(text):
            if wanted is not None and feat not in wanted:
                continue
            cur = best.get(feat)
            if cur is None or n > cur[0]:
                best[feat] = (n, text)
    return {feat: text for feat, (_, text) in best.items()}


def top_features(
    model: LinearModel, k: int = 10, examples: Mapping[str, str] | None = None
) -> tuple[list[RankedFeature], list[RankedFeature]]:
    """The ``k`` largest positive and ``k`` most negative weights; ties by name."""
    items = sorted(model.weight_map().items())
    pos = sorted((kv for kv in items if kv[1] > 0), key=lambda kv: (-kv[1], kv[0]))[:k]
    neg = sorted((kv for kv in items if kv[1] < 0), key=lambda kv: (kv[1], kv[0]))[:k]
    ex = examples or {}
    return (
        [RankedFeature(n, w, ex.get(n)) for n, w in pos],
        [RankedFeature(n, w, ex.get(n)) for n, w in neg],
    )


def write_top_features(pos: list[RankedFeature], neg: list[RankedFeature], stream: IO[str]) -> None:
    stream.write("rank\tabove_feature\tabove_weight\tabove_example\tbelow_feature\tbelow_weight\tbelow_example\n")
    for i in range(max(len(pos), len(neg))):
        cells = [str(i + 1)]
        for lst in (pos, neg):
            if i < len(lst):
                f = lst[i]
                cells += [f.name, f"{f.weight:.6g}", f.example or ""]
            else:
                cells += ["", "", ""]
        stream.write("\t".join(cells) + "\n")


# -- decision-boundary analysis ---------------------------------------------


@dataclass(frozen=True)
class ProfileGroup:
    index: int
    lo_pct: float
    hi_pct: float
    user_ids: tuple[str, ...]
    below: float
    on_target: float
    above: float
    mean_days: float

    @property
    def label(self) -> str:
        return f"{self.lo_pct:g}-{self.hi_pct:g}%"


@dataclass
class MarginProfile:
    scores: list[tuple[str, float]]
    groups: list[ProfileGroup]

    def dump(self, stream: IO[str]) -> None:
        stream.write("group\tusers\t% Below\t% Ontarget\t% Above\tmean_days\n")
        for g in self.groups:
            stream.write(
                f"{g.label}\t{len(g.user_ids)}\t{100 * g.below:.1f}\t{100 * g.on_target:.1f}"
                f"\t{100 * g.above:.1f}\t{g.mean_days:.1f}\n"
            )


def margin_profile(
    model: LinearModel,
    sample: Sample,
    user_days: Mapping[str, Sequence[LabeledDay]],
    groups: int = 20,
) -> MarginProfile:
    """Users sorted by signed distance to the boundary, cut into equal percentile groups.

    Each group reports the macro-averaged day-label distribution of its
    users and their mean number of labeled days.
    """
    norm = float(np.linalg.norm(model.weights)) or 1.0
    dist = model.decision_function(sample.X) / norm
    order = sorted(range(len(sample)), key=lambda i: (dist[i], sample.user_ids[i]))
    scores = [(sample.user_ids[i], float(dist[i])) for i in order]
    out = []
    step = 100.0 / groups
    for g, chunk in enumerate(np.array_split(np.array(order, dtype=int), groups)):
        ids = tuple(sample.user_ids[i] for i in chunk)
        fr = {lab: 0.0 for lab in LABEL_ORDER}
        total_days = 0
        for uid in ids:
            days = user_days[uid]
            total_days += len(days)
            for lab in LABEL_ORDER:
                fr[lab] += sum(1 for d in days if d.label is lab) / len(days)
        m = len(ids) or 1
        out.append(
            ProfileGroup(
                g, round(g * step, 6), round((g + 1) * step, 6), ids,
                fr[DayLabel.BELOW] / m, fr[DayLabel.ON_TARGET] / m, fr[DayLabel.ABOVE] / m,
                total_days / m,
            )
        )
    return MarginProfile(scores, out)


@dataclass(frozen=True)
class ExtremeCase:
    user_id: str
    score: float
    label: DayLabel
    modal_fraction: float


def error_extremes(
    model: LinearModel, sample: Sample, labels: Mapping[str, UserLabel]
) -> dict[str, ExtremeCase | None]:
    """Farthest false positive/negative and the two most extreme users overall."""
    scores = model.decision_function(sample.X)

    def case(i: int | None) -> ExtremeCase | None:
        if i is None:
            return None
        u = sample.user_ids[i]
        return ExtremeCase(u, float(scores[i]), labels[u].label, labels[u].modal_fraction)

    fp = [i for i in range(len(sample)) if scores[i] > 0 and sample.y[i] < 0]
    fn = [i for i in range(len(sample)) if scores[i] <= 0 and sample.y[i] > 0]
    n = len(sample)
    return {
        "farthest_false_positive": case(max(fp, key=lambda i: scores[i]) if fp else None),
        "farthest_false_negative": case(min(fn, key=lambda i: scores[i]) if fn else None),
        "most_above": case(int(np.argmax(scores)) if n else None),
        "most_below": case(int(np.argmin(scores)) if n else None),
    }
