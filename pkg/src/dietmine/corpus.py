"""Diary data model and the tab-separated diary record format.

One line per food entry::

    user_id  date  meal_name  entry_text  calories  goal_kcal  [day_total]

The header line is mandatory.  ``day_total`` is optional; when present on a
line it must equal the sum of that day's entry calories.
"""

from __future__ import annotations

import datetime as dt
import io
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

HEADER = ("user_id", "date", "meal_name", "entry_text", "calories", "goal_kcal")
OPTIONAL_COLUMNS = ("day_total",)


class CorpusError(ValueError):
    """Raised for malformed or inconsistent diary records."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class FoodEntry:
    user_id: str
    date: dt.date
    meal_name: str
    text: str
    calories: int

    def __post_init__(self):
        if self.calories < 0:
            raise CorpusError(f"negative calories ({self.calories}) for {self.text!r}")
        if not self.text.strip():
            raise CorpusError("empty entry text")


@dataclass(frozen=True)
class DayRecord:
    user_id: str
    date: dt.date
    entries: tuple[FoodEntry, ...]
    goal: int
    actual: int = field(default=-1)

    def __post_init__(self):
        total = sum(e.calories for e in self.entries)
        if self.actual == -1:
            object.__setattr__(self, "actual", total)
        elif self.actual != total:
            raise CorpusError(
                f"{self.user_id} {self.date}: actual {self.actual} != entry sum {total}"
            )
        if self.goal <= 0:
            raise CorpusError(f"{self.user_id} {self.date}: goal must be positive, got {self.goal}")
        for e in self.entries:
            if e.user_id != self.user_id or e.date != self.date:
                raise CorpusError(f"entry {e.text!r} does not belong to {self.user_id} {self.date}")

    @property
    def weekday(self) -> int:
        """ISO weekday, Monday == 1."""
        return self.date.isoweekday()


@dataclass(frozen=True)
class UserDiary:
    user_id: str
    days: tuple[DayRecord, ...]

    def __post_init__(self):
        for a, b in zip(self.days, self.days[1:]):
            if not a.date < b.date:
                raise CorpusError(f"{self.user_id}: days not strictly increasing at {b.date}")

    @property
    def n_entries(self) -> int:
        return sum(len(d.entries) for d in self.days)


@dataclass(frozen=True)
class CorpusStats:
    users: int
    days: int
    median_days: int
    entries: int
    mean_days: float

    def as_rows(self) -> list[tuple[str, str]]:
        return [
            ("users", str(self.users)),
            ("days", str(self.days)),
            ("median_days_per_user", str(self.median_days)),
            ("mean_days_per_user", f"{self.mean_days:.1f}"),
            ("entries", str(self.entries)),
        ]


def _parse_int(value: str, name: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise CorpusError(f"{name} is not an integer: {value!r}", lineno) from None


def iter_records(stream: IO[str]) -> Iterator[tuple[int, FoodEntry, int, int | None]]:
    """Yield ``(line_number, entry, goal, declared_total)`` per data line."""
    header_seen = False
    ncols = len(HEADER)
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if not header_seen:
            if tuple(fields[: len(HEADER)]) != HEADER or tuple(fields[len(HEADER):]) not in (
                (),
                OPTIONAL_COLUMNS,
            ):
                raise CorpusError(f"bad header {fields!r}; expected {list(HEADER)}", lineno)
            header_seen = True
            ncols = len(fields)
            continue
        if len(fields) != ncols:
            raise CorpusError(f"expected {ncols} fields, got {len(fields)}", lineno)
        user_id, date_s, meal, text, cal_s, goal_s = fields[:6]
        if not user_id:
            raise CorpusError("empty user_id", lineno)
        try:
            date = dt.date.fromisoformat(date_s)
        except ValueError:
            raise CorpusError(f"invalid ISO date {date_s!r}", lineno) from None
        calories = _parse_int(cal_s, "calories", lineno)
        goal = _parse_int(goal_s, "goal_kcal", lineno)
        if calories < 0:
            raise CorpusError(f"negative calories {calories}", lineno)
        if goal <= 0:
            raise CorpusError(f"goal_kcal must be positive, got {goal}", lineno)
        if not text.strip():
            raise CorpusError("empty entry text", lineno)
        declared = None
        if ncols == 7 and fields[6] != "":
            declared = _parse_int(fields[6], "day_total", lineno)
        yield lineno, FoodEntry(user_id, date, meal, text, calories), goal, declared


def parse_corpus(stream: IO[str]) -> list[UserDiary]:
    """Parse an open diary stream.  See :func:`load_corpus`."""
    days: dict[tuple[str, dt.date], list[FoodEntry]] = {}
    goals: dict[tuple[str, dt.date], int] = {}
    declared: dict[tuple[str, dt.date], tuple[int, int]] = {}
    seen: dict[tuple[str, dt.date, str, str], int] = {}

    for lineno, entry, goal, total in iter_records(stream):
        key = (entry.user_id, entry.date)
        dup = (entry.user_id, entry.date, entry.meal_name, entry.text)
        if dup in seen:
            raise CorpusError(f"duplicate entry (first seen on line {seen[dup]})", lineno)
        seen[dup] = lineno
        if key in goals and goals[key] != goal:
            raise CorpusError(
                f"goal {goal} conflicts with goal {goals[key]} for {entry.user_id} {entry.date}",
                lineno,
            )
        goals[key] = goal
        days.setdefault(key, []).append(entry)
        if total is not None:
            if key in declared and declared[key][0] != total:
                raise CorpusError(f"conflicting day_total {total}", lineno)
            declared[key] = (total, lineno)

    for key, (total, lineno) in declared.items():
        actual = sum(e.calories for e in days[key])
        if actual != total:
            raise CorpusError(f"declared day_total {total} != entry sum {actual}", lineno)

    by_user: dict[str, list[DayRecord]] = {}
    for (user_id, date), entries in days.items():
        by_user.setdefault(user_id, []).append(
            DayRecord(user_id, date, tuple(entries), goals[(user_id, date)])
        )
    return [
        UserDiary(user_id, tuple(sorted(recs, key=lambda d: d.date)))
        for user_id, recs in sorted(by_user.items())
    ]


def load_corpus(path: str | os.PathLike) -> list[UserDiary]:
    """Load a diary file, grouped by user (sorted by id) with days ascending."""
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_corpus(fh)


def loads_corpus(text: str) -> list[UserDiary]:
    return parse_corpus(io.StringIO(text))


def _check_field(value: str, name: str) -> str:
    if "\t" in value or "\n" in value or "\r" in value:
        raise CorpusError(f"{name} contains a tab or newline: {value!r}")
    return value


def write_corpus(corpus: Iterable[UserDiary], stream: IO[str]) -> None:
    stream.write("\t".join(HEADER) + "\n")
    for diary in corpus:
        for day in diary.days:
            for e in day.entries:
                stream.write(
                    "\t".join(
                        (
                            _check_field(e.user_id, "user_id"),
                            e.date.isoformat(),
                            _check_field(e.meal_name, "meal_name"),
                            _check_field(e.text, "entry_text"),
                            str(e.calories),
                            str(day.goal),
                        )
                    )
                    + "\n"
                )


def dumps_corpus(corpus: Iterable[UserDiary]) -> str:
    buf = io.StringIO()
    write_corpus(corpus, buf)
    return buf.getvalue()


def lower_median(values: list[int]) -> int:
    if not values:
        return 0
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def corpus_stats(corpus: Iterable[UserDiary]) -> CorpusStats:
    corpus = list(corpus)
    day_counts = [len(d.days) for d in corpus]
    n_days = sum(day_counts)
    return CorpusStats(
        users=len(corpus),
        days=n_days,
        median_days=lower_median(day_counts),
        entries=sum(d.n_entries for d in corpus),
        mean_days=n_days / len(corpus) if corpus else 0.0,
    )
