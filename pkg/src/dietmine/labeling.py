"""Day and user calorie-goal labels, plus weekday and lifetime aggregates."""

from __future__ import annotations

import datetime as dt
import enum
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .corpus import UserDiary


class DayLabel(str, enum.Enum):
    BELOW = "below"
    ON_TARGET = "on-target"
    ABOVE = "above"

    def __str__(self) -> str:
        return self.value


LABEL_ORDER = (DayLabel.BELOW, DayLabel.ON_TARGET, DayLabel.ABOVE)
DEFAULT_TIE_PRIORITY = (DayLabel.ABOVE, DayLabel.BELOW, DayLabel.ON_TARGET)
WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class LabelPolicy:
    below_margin: float = 0.2
    symmetric: bool = False
    min_day_kcal: int = 100
    tie_priority: tuple[DayLabel, ...] = DEFAULT_TIE_PRIORITY

    def __post_init__(self):
        if not 0 < self.below_margin < 1:
            raise LabelError(f"below_margin must lie in (0, 1), got {self.below_margin}")
        if self.min_day_kcal < 0:
            raise LabelError("min_day_kcal must be >= 0")
        if sorted(self.tie_priority) != sorted(LABEL_ORDER):
            raise LabelError("tie_priority must list each label exactly once")


def label_day(goal: int, actual: int, policy: LabelPolicy = LabelPolicy()) -> DayLabel | None:
    """Label one day, or return None when fewer than ``min_day_kcal`` were logged.

    Strict inequalities throughout: a day exactly at the margin, or exactly
    at goal, is on-target.
    """
    if goal <= 0:
        raise LabelError(f"goal must be positive, got {goal}")
    if actual < policy.min_day_kcal:
        return None
    if policy.symmetric:
        if (actual - goal) / goal > policy.below_margin:
            return DayLabel.ABOVE
    elif actual > goal:
        return DayLabel.ABOVE
    if (goal - actual) / goal > policy.below_margin:
        return DayLabel.BELOW
    return DayLabel.ON_TARGET


@dataclass(frozen=True)
class LabeledDay:
    user_id: str
    date: dt.date
    goal: int
    actual: int
    label: DayLabel

    @property
    def weekday(self) -> int:
        return self.date.isoweekday()

    def to_line(self) -> str:
        return "\t".join(
            (self.user_id, self.date.isoformat(), WEEKDAYS[self.weekday - 1],
             str(self.goal), str(self.actual), self.label.value)
        )


LABELED_DAY_HEADER = "user_id\tdate\tweekday\tgoal\tactual\tlabel"


def label_days(diary: UserDiary, policy: LabelPolicy = LabelPolicy()) -> list[LabeledDay]:
    out = []
    for day in diary.days:
        lab = label_day(day.goal, day.actual, policy)
        if lab is not None:
            out.append(LabeledDay(diary.user_id, day.date, day.goal, day.actual, lab))
    return out


@dataclass(frozen=True)
class UserLabel:
    user_id: str
    label: DayLabel
    counts: dict[DayLabel, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def fraction(self, label: DayLabel) -> float:
        return self.counts.get(label, 0) / self.total

    @property
    def modal_fraction(self) -> float:
        return self.fraction(self.label)

    def fractions(self) -> dict[DayLabel, float]:
        return {lab: self.fraction(lab) for lab in LABEL_ORDER}


def modal_label(counts: dict[DayLabel, int], tie_priority: Sequence[DayLabel] = DEFAULT_TIE_PRIORITY) -> DayLabel:
    best = max(counts.get(lab, 0) for lab in LABEL_ORDER)
    if best == 0:
        raise LabelError("no labeled days")
    return next(lab for lab in tie_priority if counts.get(lab, 0) == best)


def label_user_days(user_id: str, days: Iterable[LabeledDay], policy: LabelPolicy = LabelPolicy()) -> UserLabel:
    tally = Counter(d.label for d in days)
    counts = {lab: tally.get(lab, 0) for lab in LABEL_ORDER}
    if not sum(counts.values()):
        raise LabelError(f"user {user_id} has no labeled days")
    return UserLabel(user_id, modal_label(counts, policy.tie_priority), counts)


def label_user(diary: UserDiary, policy: LabelPolicy = LabelPolicy()) -> UserLabel:
    """Modal day label; ties resolved by ``policy.tie_priority``."""
    return label_user_days(diary.user_id, label_days(diary, policy), policy)


@dataclass(frozen=True)
class ClassCounts:
    below: int
    on_target: int
    above: int

    @property
    def above_vs_below(self) -> int:
        return self.below + self.above


def class_counts(labels: Iterable[UserLabel]) -> ClassCounts:
    tally = Counter(u.label for u in labels)
    return ClassCounts(tally[DayLabel.BELOW], tally[DayLabel.ON_TARGET], tally[DayLabel.ABOVE])


def above_vs_below(labels: Iterable[UserLabel]) -> list[UserLabel]:
    return [u for u in labels if u.label is not DayLabel.ON_TARGET]


@dataclass(frozen=True)
class WeekdayRow:
    weekday: int
    above: float
    on_target: float
    below: float
    total: int


def weekly_trend(days: Iterable[LabeledDay]) -> list[WeekdayRow]:
    """Label percentages per ISO weekday over all labeled (user, day) pairs, Monday first."""
    tally: dict[int, Counter] = {w: Counter() for w in range(1, 8)}
    for d in days:
        tally[d.weekday][d.label] += 1
    rows = []
    for w in range(1, 8):
        c = tally[w]
        n = sum(c.values())
        pct = (lambda lab: 100.0 * c[lab] / n) if n else (lambda lab: 0.0)
        rows.append(WeekdayRow(w, pct(DayLabel.ABOVE), pct(DayLabel.ON_TARGET), pct(DayLabel.BELOW), n))
    return rows


def write_weekly_trend(rows: Sequence[WeekdayRow], stream: IO[str]) -> None:
    stream.write("\t" + "\t".join(WEEKDAYS) + "\n")
    stream.write("% Above\t" + "\t".join(f"{r.above:.1f}" for r in rows) + "\n")
    stream.write("% Ontarget\t" + "\t".join(f"{r.on_target:.1f}" for r in rows) + "\n")
    stream.write("% Below\t" + "\t".join(f"{r.below:.1f}" for r in rows) + "\n")
    stream.write("# Total\t" + "\t".join(str(r.total) for r in rows) + "\n")


def chronological_buckets(n: int, bucket_count: int) -> list[range]:
    """Split ``range(n)`` into ``bucket_count`` runs; earlier runs absorb the remainder."""
    size, extra = divmod(n, bucket_count)
    out, start = [], 0
    for b in range(bucket_count):
        stop = start + size + (1 if b < extra else 0)
        out.append(range(start, stop))
        start = stop
    return out


@dataclass(frozen=True)
class BucketRow:
    bucket: int
    bucket_count: int
    below: float
    on_target: float
    above: float
    users: int

    @property
    def label(self) -> str:
        step = 100 // self.bucket_count if 100 % self.bucket_count == 0 else 100 / self.bucket_count
        return f"{self.bucket * step:g}-{(self.bucket + 1) * step:g}%"


def lifetime_buckets(
    user_days: Iterable[Sequence[LabeledDay]],
    bucket_count: int = 10,
    aggregate: str = "modal",
    policy: LabelPolicy = LabelPolicy(),
) -> list[BucketRow]:
    """Label distribution per chronological slice of each user's labeled days.

    Each user's labeled days (in date order) are cut into ``bucket_count``
    runs by event index.  With ``aggregate="modal"`` every (user, bucket)
    gets its modal label and a bucket reports the share of users per label;
    with ``aggregate="macro"`` a bucket reports the mean over users of
    their within-bucket day-label fractions.  Users with fewer labeled days
    than buckets are skipped.
    """
    if aggregate not in ("modal", "macro"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    sums = [dict.fromkeys(LABEL_ORDER, 0.0) for _ in range(bucket_count)]
    n_users = 0
    for days in user_days:
        days = sorted(days, key=lambda d: d.date)
        if len(days) < bucket_count:
            continue
        n_users += 1
        for b, idx in enumerate(chronological_buckets(len(days), bucket_count)):
            tally = Counter(days[i].label for i in idx)
            if aggregate == "modal":
                sums[b][modal_label(tally, policy.tie_priority)] += 1.0
            else:
                for lab in LABEL_ORDER:
                    sums[b][lab] += tally[lab] / len(idx)
    rows = []
    for b, s in enumerate(sums):
        frac = (lambda lab: s[lab] / n_users) if n_users else (lambda lab: 0.0)
        rows.append(BucketRow(b, bucket_count, frac(DayLabel.BELOW), frac(DayLabel.ON_TARGET),
                              frac(DayLabel.ABOVE), n_users))
    return rows


def write_buckets(rows: Sequence[BucketRow], stream: IO[str]) -> None:
    stream.write("bucket\t% Below\t% Ontarget\t% Above\tusers\n")
    for r in rows:
        stream.write(
            f"{r.label}\t{100 * r.below:.1f}\t{100 * r.on_target:.1f}\t{100 * r.above:.1f}\t{r.users}\n"
        )


USER_LABEL_HEADER = "user_id\tlabel\tbelow_days\ton_target_days\tabove_days\tmodal_fraction"


def dump_user_labels(labels: Iterable[UserLabel], stream: IO[str]) -> None:
    stream.write(USER_LABEL_HEADER + "\n")
    for u in labels:
        c = u.counts
        stream.write(
            f"{u.user_id}\t{u.label.value}\t{c[DayLabel.BELOW]}\t{c[DayLabel.ON_TARGET]}"
            f"\t{c[DayLabel.ABOVE]}\t{u.modal_fraction:.4f}\n"
        )


def load_user_labels(stream: IO[str]) -> dict[str, UserLabel]:
    out = {}
    for lineno, line in enumerate(stream, start=1):
        if lineno == 1 or not line.strip():
            continue
        uid, lab, b, o, a, _ = line.rstrip("\n").split("\t")
        counts = {DayLabel.BELOW: int(b), DayLabel.ON_TARGET: int(o), DayLabel.ABOVE: int(a)}
        out[uid] = UserLabel(uid, DayLabel(lab), counts)
    return out


def dump_labeled_days(days: Iterable[LabeledDay], stream: IO[str]) -> None:
    stream.write(LABELED_DAY_HEADER + "\n")
    for d in days:
        stream.write(d.to_line() + "\n")


def load_labeled_days(stream: IO[str]) -> dict[str, list[LabeledDay]]:
    """Labeled days grouped by user, in file order."""
    out: dict[str, list[LabeledDay]] = {}
    for lineno, line in enumerate(stream, start=1):
        if lineno == 1 or not line.strip():
            continue
        uid, date, _, goal, actual, lab = line.rstrip("\n").split("\t")
        out.setdefault(uid, []).append(
            LabeledDay(uid, dt.date.fromisoformat(date), int(goal), int(actual), DayLabel(lab))
        )
    return out
