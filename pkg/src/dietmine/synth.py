"""Seeded synthetic diary corpora with planted ground truth.

Spec files are INI text::

    [synth]
    rng = PCG64
    seed = 7
    users = 1000
    days_min = 35
    days_max = 90
    class_mix = 0.5, 0.0, 0.5          ; below, on-target, above
    above_probs = 0.10, 0.15, 0.75     ; day-label probabilities of true-above users
    weekday_above_rates = 0.191, 0.200, 0.206, 0.210, 0.233, 0.249, 0.237
    below_drift = 0.4

    [token_multipliers]
    above.oil = 3.0

All randomness comes from numpy's PCG64 bit generator seeded with
``seed``.  Class sizes are exact (largest remainder over ``class_mix``)
and assigned to users in shuffled order.  Day labels are drawn from stratified uniforms: the uniforms for
all user-days falling on one weekday are ``(permutation + jitter) / m``,
so realized label shares track the planted probabilities to within 1/m.
"""

from __future__ import annotations

import configparser
import datetime as dt
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import IO

import numpy as np

from .corpus import DayRecord, FoodEntry, UserDiary, dumps_corpus
from .labeling import LABEL_ORDER, DayLabel
from .text import tokenize

RNG_NAME = "PCG64"
MEALS = ("Breakfast", "Lunch", "Dinner", "Snacks")
CLASS_KEYS = {"below": DayLabel.BELOW, "on_target": DayLabel.ON_TARGET, "above": DayLabel.ABOVE}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class Food:
    text: str
    rate: float
    group: str = ""

    @property
    def tokens(self) -> frozenset[str]:
        return frozenset(tokenize(self.text))


def parse_foods(stream: IO[str]) -> list[Food]:
    foods = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise SynthError(f"food table line {lineno}: expected 2 or 3 fields")
        foods.append(Food(parts[0], float(parts[1]), parts[2] if len(parts) == 3 else ""))
    return foods


def default_foods() -> list[Food]:
    with resources.files("dietmine").joinpath("data/foods.tsv").open(encoding="utf-8") as fh:
        return parse_foods(fh)


@dataclass
class SynthSpec:
    seed: int = 0
    users: int = 200
    days_min: int = 35
    days_max: int = 90
    start: dt.date = dt.date(2015, 1, 5)
    start_jitter: int = 28
    class_mix: tuple[float, float, float] = (0.55, 0.25, 0.20)
    below_probs: tuple[float, float, float] = (0.70, 0.20, 0.10)
    on_target_probs: tuple[float, float, float] = (0.20, 0.60, 0.20)
    above_probs: tuple[float, float, float] = (0.10, 0.20, 0.70)
    weekday_above_rates: tuple[float, ...] | None = None
    below_drift: float = 0.0
    token_multipliers: dict[DayLabel, dict[str, float]] = field(default_factory=dict)
    clusters: int = 0
    cluster_boost: float = 4.0
    low_kcal_rate: float = 0.0
    goals: tuple[int, ...] = (1500, 1800, 2000, 2200)
    foods: list[Food] | None = None

    def class_probs(self, cls: DayLabel) -> tuple[float, float, float]:
        return {
            DayLabel.BELOW: self.below_probs,
            DayLabel.ON_TARGET: self.on_target_probs,
            DayLabel.ABOVE: self.above_probs,
        }[cls]

    def validate(self) -> None:
        if self.users <= 0:
            raise SynthError("users must be > 0")
        if not 1 <= self.days_min <= self.days_max:
            raise SynthError("need 1 <= days_min <= days_max")
        for name in ("class_mix", "below_probs", "on_target_probs", "above_probs"):
            vec = getattr(self, name)
            if len(vec) != 3 or any(not 0 <= p <= 1 for p in vec) or abs(sum(vec) - 1) > 1e-9:
                raise SynthError(f"{name} must be three probabilities summing to 1")
        if self.weekday_above_rates is not None:
            if len(self.weekday_above_rates) != 7:
                raise SynthError("weekday_above_rates needs 7 values, Monday first")
            if any(not 0 <= p <= 1 for p in self.weekday_above_rates):
                raise SynthError("weekday_above_rates must lie in [0, 1]")
        for p in (self.low_kcal_rate,):
            if not 0 <= p <= 1:
                raise SynthError("low_kcal_rate must lie in [0, 1]")
        if not self.goals or any(g < 200 for g in self.goals):
            raise SynthError("goals must be non-empty and >= 200 kcal")
        for cls, mult in self.token_multipliers.items():
            if any(f < 0 for f in mult.values()):
                raise SynthError(f"negative token multiplier for {cls}")
        foods = self.food_table()
        if not foods or any(not 0 <= f.rate <= 1 for f in foods):
            raise SynthError("food table must be non-empty with rates in [0, 1]")
        if self.clusters and self.clusters > len(self.cluster_groups()):
            raise SynthError(f"clusters={self.clusters} but only {len(self.cluster_groups())} food groups")

    def food_table(self) -> list[Food]:
        return self.foods if self.foods is not None else default_foods()

    def cluster_groups(self) -> list[str]:
        return sorted({f.group for f in self.food_table() if f.group})


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(","))


def load_synth_spec(path: str | os.PathLike) -> SynthSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), delimiters=("=",))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return spec_from_config(parser, base_dir=os.path.dirname(os.fspath(path)))


def spec_from_config(parser: configparser.ConfigParser, base_dir: str = ".") -> SynthSpec:
    if "synth" not in parser:
        raise SynthError("spec file needs a [synth] section")
    sec = parser["synth"]
    rng_name = sec.get("rng", RNG_NAME)
    if rng_name != RNG_NAME:
        raise SynthError(f"unsupported rng {rng_name!r}; only {RNG_NAME} is defined")
    spec = SynthSpec()
    try:
        for key in ("seed", "users", "days_min", "days_max", "start_jitter", "clusters"):
            if key in sec:
                setattr(spec, key, sec.getint(key))
        for key in ("below_drift", "cluster_boost", "low_kcal_rate"):
            if key in sec:
                setattr(spec, key, sec.getfloat(key))
        for key in ("class_mix", "below_probs", "on_target_probs", "above_probs", "weekday_above_rates"):
            if key in sec:
                setattr(spec, key, _floats(sec[key]))
        if "goals" in sec:
            spec.goals = tuple(int(v) for v in sec["goals"].split(","))
        if "start" in sec:
            spec.start = dt.date.fromisoformat(sec["start"].strip())
    except ValueError as exc:
        raise SynthError(f"[synth]: {exc}") from None
    if "foods" in sec:
        with open(os.path.join(base_dir, sec["foods"].strip()), encoding="utf-8") as fh:
            spec.foods = parse_foods(fh)
    if "token_multipliers" in parser:
        for key, value in parser["token_multipliers"].items():
            cls_name, _, token = key.partition(".")
            if cls_name not in CLASS_KEYS or not token:
                raise SynthError(f"[token_multipliers] key {key!r} must look like above.oil")
            spec.token_multipliers.setdefault(CLASS_KEYS[cls_name], {})[token] = float(value)
    spec.validate()
    return spec


@dataclass
class GroundTruth:
    user_class: dict[str, DayLabel]
    user_cluster: dict[str, int]
    token_affinity: dict[str, tuple[DayLabel, float]]

    def dump(self, stream: IO[str]) -> None:
        stream.write("# kind\tkey\tclass\tvalue\n")
        for u in sorted(self.user_class):
            stream.write(f"user\t{u}\t{self.user_class[u].value}\t{self.user_cluster.get(u, -1)}\n")
        for tok in sorted(self.token_affinity):
            cls, factor = self.token_affinity[tok]
            stream.write(f"token\t{tok}\t{cls.value}\t{factor!r}\n")

    @classmethod
    def load(cls, stream: IO[str]) -> "GroundTruth":
        users, clusters, tokens = {}, {}, {}
        for line in stream:
            if line.startswith("#") or not line.strip():
                continue
            kind, key, label, value = line.rstrip("\n").split("\t")
            if kind == "user":
                users[key] = DayLabel(label)
                clusters[key] = int(value)
            else:
                tokens[key] = (DayLabel(label), float(value))
        return cls(users, clusters, tokens)


def class_sizes(mix: tuple[float, float, float], users: int) -> list[int]:
    """Exact per-class user counts by largest remainder; ties go to the earlier class."""
    raw = [p * users for p in mix]
    sizes = [int(np.floor(r)) for r in raw]
    order = sorted(range(3), key=lambda k: (-(raw[k] - sizes[k]), k))
    for k in order[: users - sum(sizes)]:
        sizes[k] += 1
    return sizes


def _day_probs(base: tuple[float, float, float], position: float, drift: float,
               above_rate: float | None) -> tuple[float, float, float]:
    below, on, above = base
    if drift:
        nb = min(1.0, max(0.0, below + drift * (position - 0.5)))
        rest, old = 1.0 - nb, on + above
        on, above = (rest * on / old, rest * above / old) if old > 0 else (rest / 2, rest / 2)
        below = nb
    if above_rate is not None:
        rest, old = 1.0 - above_rate, below + on
        below, on = (rest * below / old, rest * on / old) if old > 0 else (rest / 2, rest / 2)
        above = above_rate
    return below, on, above


def _actual_for(label: DayLabel, goal: int, rng: np.random.Generator) -> int:
    # strict-inequality boundaries: below iff actual < 0.8 goal, above iff actual > goal
    lo_on = int(np.floor(0.8 * goal)) + 1
    if label is DayLabel.ABOVE:
        return int(rng.integers(goal + 1, int(goal * 1.3) + 2))
    if label is DayLabel.ON_TARGET:
        return int(rng.integers(lo_on, goal + 1))
    return int(rng.integers(max(100, int(goal * 0.4)), int(np.ceil(0.8 * goal))))


def _split_calories(total: int, k: int, rng: np.random.Generator) -> list[int]:
    weights = rng.random(k) + 0.5
    parts = np.floor(total * weights / weights.sum()).astype(int)
    parts[-1] += total - int(parts.sum())
    return parts.tolist()


def generate(spec: SynthSpec) -> tuple[list[UserDiary], GroundTruth]:
    """Build a corpus and its ground truth; same spec, same output."""
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    foods = spec.food_table()
    groups = spec.cluster_groups()
    base_rates = np.array([f.rate for f in foods])
    food_tokens = [f.tokens for f in foods]

    classes = rng.permutation(np.repeat(np.arange(3), class_sizes(spec.class_mix, spec.users)))
    users = []
    for i in range(spec.users):
        uid = f"u{i + 1:05d}"
        cls = LABEL_ORDER[int(classes[i])]
        cluster = int(rng.integers(spec.clusters)) if spec.clusters else -1
        n_days = int(rng.integers(spec.days_min, spec.days_max + 1))
        first = spec.start + dt.timedelta(days=int(rng.integers(0, spec.start_jitter + 1)))
        goal = int(spec.goals[int(rng.integers(len(spec.goals)))])
        rates = base_rates.copy()
        for tok, factor in spec.token_multipliers.get(cls, {}).items():
            for j, toks in enumerate(food_tokens):
                if tok in toks:
                    rates[j] *= factor
        if cluster >= 0:
            for j, f in enumerate(foods):
                if f.group == groups[cluster]:
                    rates[j] *= spec.cluster_boost
        users.append((uid, cls, cluster, n_days, first, goal, np.minimum(rates, 1.0)))

    # stratified label uniforms per weekday
    slots: dict[int, list[tuple[int, int]]] = {w: [] for w in range(1, 8)}
    for ui, (_, _, _, n_days, first, _, _) in enumerate(users):
        for j in range(n_days):
            slots[(first + dt.timedelta(days=j)).isoweekday()].append((ui, j))
    label_u: dict[tuple[int, int], float] = {}
    for w in range(1, 8):
        m = len(slots[w])
        if m:
            u = (rng.permutation(m) + rng.random(m)) / m
            label_u.update(zip(slots[w], u.tolist()))

    diaries = []
    truth = GroundTruth({}, {}, {})
    for ui, (uid, cls, cluster, n_days, first, goal, rates) in enumerate(users):
        truth.user_class[uid] = cls
        truth.user_cluster[uid] = cluster
        days = []
        for j in range(n_days):
            date = first + dt.timedelta(days=j)
            position = j / (n_days - 1) if n_days > 1 else 0.5
            above_rate = (
                spec.weekday_above_rates[date.isoweekday() - 1] if spec.weekday_above_rates else None
            )
            pb, po, _ = _day_probs(spec.class_probs(cls), position, spec.below_drift, above_rate)
            u = label_u[(ui, j)]
            label = DayLabel.BELOW if u < pb else DayLabel.ON_TARGET if u < pb + po else DayLabel.ABOVE
            if spec.low_kcal_rate and rng.random() < spec.low_kcal_rate:
                actual = int(rng.integers(0, 100))
            else:
                actual = _actual_for(label, goal, rng)
            chosen = np.flatnonzero(rng.random(len(foods)) < rates)
            if not len(chosen):
                chosen = np.array([int(rng.choice(len(foods), p=rates / rates.sum()))])
            meals = rng.integers(len(MEALS), size=len(chosen))
            cals = _split_calories(actual, len(chosen), rng)
            order = sorted(range(len(chosen)), key=lambda k: (meals[k], chosen[k]))
            entries = tuple(
                FoodEntry(uid, date, MEALS[meals[k]], foods[chosen[k]].text, cals[k]) for k in order
            )
            days.append(DayRecord(uid, date, entries, goal))
        diaries.append(UserDiary(uid, tuple(days)))

    for cls, mult in spec.token_multipliers.items():
        for tok, factor in mult.items():
            truth.token_affinity[tok] = (cls, factor)
    return diaries, truth


def generate_text(spec: SynthSpec) -> tuple[str, GroundTruth]:
    """Corpus in the diary file format plus ground truth."""
    diaries, truth = generate(spec)
    return dumps_corpus(diaries), truth


def planted_blobs(
    n_blobs: int = 6,
    points: int = 100,
    dim: int = 10,
    seed: int = 0,
    spread: float = 10.0,
    sd: float = 1.0,
    min_separation: float = 8.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian blobs whose centres are at least ``min_separation * sd`` apart."""
    rng = np.random.Generator(np.random.PCG64(seed))
    centres: list[np.ndarray] = []
    while len(centres) < n_blobs:
        c = rng.uniform(-spread, spread, dim)
        if all(np.linalg.norm(c - o) >= min_separation * sd for o in centres):
            centres.append(c)
    X = np.vstack([c + rng.normal(0.0, sd, (points, dim)) for c in centres])
    return X, np.repeat(np.arange(n_blobs), points)
