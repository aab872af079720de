"""Token and category feature extraction with support pruning.

A user's feature value is the number of distinct qualifying days (at least
``min_day_kcal`` logged) on which the feature appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

from .corpus import DayRecord, UserDiary
from .taxonomy import Annotation, path_name
from .text import tokenize

TOKEN = "token"
CATEGORY = "category"
SPACES = (TOKEN, CATEGORY)

DEFAULT_SUPPORT = 500
DEFAULT_MIN_DAYS = 30
DEFAULT_MIN_DAY_KCAL = 100


@dataclass
class FeatureVocabulary:
    space: str
    names: list[str]
    support: list[int]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown feature space {self.space!r}")
        self.index = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def dump(self, stream: IO[str]) -> None:
        stream.write("feature_name\tsupport_count\tfeature_id\n")
        for i, (name, sup) in enumerate(zip(self.names, self.support)):
            stream.write(f"{name}\t{sup}\t{i}\n")


@dataclass
class FeatureVector:
    user_id: str
    space: str
    values: dict[int, float]
    normalized: bool = False

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values.values()))

    def to_line(self) -> str:
        fmt = repr if self.normalized else (lambda v: str(int(v)))
        pairs = (f"{k}:{fmt(self.values[k])}" for k in sorted(self.values))
        return "\t".join([self.user_id, *pairs])


class FeatureExtractor:
    """Maps entry texts to feature names for one space, memoized per text."""

    def __init__(self, space: str, annotations: Mapping[str, Annotation] | None = None):
        if space not in SPACES:
            raise ValueError(f"unknown feature space {space!r}")
        if space == CATEGORY and annotations is None:
            raise ValueError("category features need precomputed annotations")
        self.space = space
        self.annotations = annotations
        self._cache: dict[str, frozenset[str]] = {}

    def entry(self, text: str) -> frozenset[str]:
        hit = self._cache.get(text)
        if hit is None:
            if self.space == TOKEN:
                hit = frozenset(tokenize(text))
            else:
                ann = self.annotations.get(text)
                hit = frozenset(path_name(p) for p in ann.paths) if ann else frozenset()
            self._cache[text] = hit
        return hit

    def day(self, day: DayRecord) -> set[str]:
        out: set[str] = set()
        for e in day.entries:
            out |= self.entry(e.text)
        return out


def build_vocabulary(
    corpus: Iterable[UserDiary],
    extractor: FeatureExtractor,
    support_threshold: int = DEFAULT_SUPPORT,
) -> FeatureVocabulary:
    """Keep features used by strictly more than ``support_threshold`` users.

    Support counts every logged day, before any calorie or user filtering.
    """
    if support_threshold < 0:
        raise ValueError("support_threshold must be >= 0")
    counts: dict[str, int] = {}
    for diary in corpus:
        used: set[str] = set()
        for day in diary.days:
            used |= extractor.day(day)
        for name in used:
            counts[name] = counts.get(name, 0) + 1
    names = sorted(n for n, c in counts.items() if c > support_threshold)
    return FeatureVocabulary(extractor.space, names, [counts[n] for n in names])


def qualifying_days(diary: UserDiary, min_day_kcal: int = DEFAULT_MIN_DAY_KCAL) -> list[DayRecord]:
    return [d for d in diary.days if d.actual >= min_day_kcal]


def featurize(
    diary: UserDiary,
    vocabulary: FeatureVocabulary,
    extractor: FeatureExtractor,
    min_day_kcal: int = DEFAULT_MIN_DAY_KCAL,
) -> FeatureVector:
    values: dict[int, float] = {}
    for day in qualifying_days(diary, min_day_kcal):
        for name in extractor.day(day):
            fid = vocabulary.index.get(name)
            if fid is not None:
                values[fid] = values.get(fid, 0) + 1
    return FeatureVector(diary.user_id, vocabulary.space, values)


def normalize(vector: FeatureVector) -> FeatureVector:
    """Scale to unit Euclidean norm; an empty vector is returned as is."""
    n = vector.norm()
    values = {k: v / n for k, v in vector.values.items()} if n > 0 else {}
    return FeatureVector(vector.user_id, vector.space, values, normalized=True)


def eligible_users(
    corpus: Iterable[UserDiary],
    vocabulary: FeatureVocabulary,
    extractor: FeatureExtractor,
    min_days: int = DEFAULT_MIN_DAYS,
    min_day_kcal: int = DEFAULT_MIN_DAY_KCAL,
) -> list[str]:
    """Users with at least ``min_days`` days of >= min_day_kcal and an in-vocabulary feature."""
    keep = []
    for diary in corpus:
        n = sum(
            1
            for day in qualifying_days(diary, min_day_kcal)
            if any(name in vocabulary.index for name in extractor.day(day))
        )
        if n >= min_days:
            keep.append(diary.user_id)
    return keep


def dump_vectors(vectors: Iterable[FeatureVector], stream: IO[str]) -> None:
    for v in vectors:
        stream.write(v.to_line() + "\n")


def load_vectors(stream: IO[str], space: str, normalized: bool = False) -> list[FeatureVector]:
    out = []
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            continue
        user_id, *pairs = line.split("\t")
        values = {}
        for pair in pairs:
            k, v = pair.split(":")
            values[int(k)] = float(v)
        out.append(FeatureVector(user_id, space, values, normalized))
    return out


def load_vocabulary(stream: IO[str], space: str) -> FeatureVocabulary:
    names, support = [], []
    for lineno, line in enumerate(stream, start=1):
        if lineno == 1 or not line.strip():
            continue
        name, sup, fid = line.rstrip("\n").split("\t")
        if int(fid) != len(names):
            raise ValueError(f"vocabulary line {lineno}: feature ids must run 0..n-1")
        names.append(name)
        support.append(int(sup))
    return FeatureVocabulary(space, names, support)
