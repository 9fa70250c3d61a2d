"""Sustained-participation labeling from commit timelines.

A contributor's timeline is their set of commit days in a repository.
Relative to a snapshot date, each timeline resolves to one of four statuses:

    excluded_gap_return   returned after a long inactivity gap before the
                          snapshot; participation pattern is excluded
    sustained             committed within the follow-up window after the
                          snapshot (sustainedp_or_not_12 = 1)
    censored              last commit close enough to the end of the data
                          that disengagement cannot be asserted
    not_sustained         none of the above (sustainedp_or_not_12 = 0)

Precedence is exactly that order.  The binary outcome variables are defined
only for sustained and not_sustained contributors.  All month-denominated
durations use a 365-day year, so 12 months equals 365 days; calendar-month
arithmetic would make labels depend on where the window happens to fall.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import CommitEvent

STATUSES = ("sustained", "not_sustained", "censored", "excluded_gap_return")


class LabelingConfigError(ValueError):
    """Inconsistent labeling configuration (a config problem, not a data one)."""


class EmptyTimelineError(ValueError):
    """Raised when a contributor has no commits to label from."""


def months_to_days(months: int) -> int:
    """Convert a month count to days on a 365-day year, rounding half up."""
    if months < 1:
        raise LabelingConfigError(f"month count must be positive, got {months}")
    return (months * 365 + 6) // 12


@dataclass(frozen=True)
class LabelingConfig:
    data_end: date
    snapshot_date: date = date(2019, 6, 30)
    window_months: int = 12
    recent_horizon_end: date = date(2024, 12, 31)
    censor_margin_months: int = 12
    gap_months: int = 12

    def __post_init__(self) -> None:
        if self.snapshot_date >= self.data_end:
            raise LabelingConfigError(
                f"snapshot_date {self.snapshot_date} must precede data_end {self.data_end}"
            )
        if self.window_end > self.data_end:
            raise LabelingConfigError(
                f"window ends {self.window_end}, beyond data_end {self.data_end}; "
                "sustained status would be unobservable"
            )
        for name in ("window_months", "censor_margin_months", "gap_months"):
            months_to_days(getattr(self, name))

    @property
    def window_end(self) -> date:
        return self.snapshot_date + timedelta(days=months_to_days(self.window_months))


@dataclass(frozen=True)
class ParticipationLabel:
    status: str
    sustainedp_or_not_12: int | None
    recent_sustainedp_or_not: int | None


def build_timeline(
    commits: Iterable[CommitEvent],
    author: str,
    repo_full_name: str | None = None,
) -> tuple[date, ...]:
    """Commit days for one author, deduplicated and sorted.

    With repo_full_name None the timeline spans all repositories (global
    activity scoping); otherwise only commits in that repository count.
    """
    days = {
        c.committed_at.date()
        for c in commits
        if c.author == author
        and (repo_full_name is None or c.repo_full_name == repo_full_name)
    }
    return tuple(sorted(days))


def detect_gap_return(timeline: Sequence[date], gap_months: int = 12) -> bool:
    """True when any two consecutive commit days are more than the gap apart."""
    threshold = months_to_days(gap_months)
    return any(
        (later - earlier).days > threshold
        for earlier, later in zip(timeline, timeline[1:])
    )


def label_participation(timeline: Sequence[date], config: LabelingConfig) -> ParticipationLabel:
    """Resolve one timeline to a participation label.

    Rules, in order: a gap-return before the snapshot excludes the
    contributor; a commit inside the follow-up window marks them sustained;
    a last commit within the censor margin of data_end leaves them censored;
    otherwise they are not sustained.
    """
    ordered = tuple(sorted(set(timeline)))
    if not ordered:
        raise EmptyTimelineError("cannot label an empty timeline")

    pre_snapshot = [d for d in ordered if d <= config.snapshot_date]
    if detect_gap_return(pre_snapshot, config.gap_months):
        return ParticipationLabel("excluded_gap_return", None, None)

    def recent() -> int:
        return int(any(config.snapshot_date < d <= config.recent_horizon_end for d in ordered))

    if any(config.snapshot_date < d <= config.window_end for d in ordered):
        return ParticipationLabel("sustained", 1, recent())

    censor_cutoff = config.data_end - timedelta(days=months_to_days(config.censor_margin_months))
    if ordered[-1] >= censor_cutoff:
        return ParticipationLabel("censored", None, None)

    return ParticipationLabel("not_sustained", 0, recent())


@dataclass
class LabelingOutcome:
    labels: dict[tuple[str, str], ParticipationLabel]
    unlabeled: list[tuple[str, str]]


def label_contributors(
    commits: Sequence[CommitEvent],
    contributors: Iterable[tuple[str, str]],
    config: LabelingConfig,
    global_activity: bool = False,
) -> LabelingOutcome:
    """Label each (repo, author) pair from commit activity.

    By default timelines are scoped to the repository; with global_activity
    an author's commits across all repositories form one shared timeline.
    Contributors with no commits in scope are reported as unlabeled.
    """
    by_scope: dict[object, list[date]] = {}
    for commit in commits:
        day = commit.committed_at.date()
        by_scope.setdefault(commit.author if global_activity else (commit.repo_full_name, commit.author), []).append(day)

    labels: dict[tuple[str, str], ParticipationLabel] = {}
    unlabeled: list[tuple[str, str]] = []
    for repo, author in sorted(set(contributors)):
        scope = author if global_activity else (repo, author)
        days = by_scope.get(scope)
        if not days:
            unlabeled.append((repo, author))
            continue
        labels[(repo, author)] = label_participation(tuple(days), config)
    return LabelingOutcome(labels=labels, unlabeled=unlabeled)


def write_labels_csv(
    path: str | Path, labels: Mapping[tuple[str, str], ParticipationLabel]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ("repo_full_name", "author", "status", "sustainedp_or_not_12", "recent_sustainedp_or_not")
        )
        for (repo, author) in sorted(labels):
            label = labels[(repo, author)]
            writer.writerow(
                (
                    repo,
                    author,
                    label.status,
                    "" if label.sustainedp_or_not_12 is None else label.sustainedp_or_not_12,
                    "" if label.recent_sustainedp_or_not is None else label.recent_sustainedp_or_not,
                )
            )
