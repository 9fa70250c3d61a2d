"""Distribution diagnostics and predictor screening.

Sample skewness follows the three-type convention of the classic statistics
packages.  With central moments m_k = sum((x - mean)^k) / n:

    type 1:  g1 = m3 / m2^(3/2)
    type 2:  G1 = g1 * sqrt(n (n - 1)) / (n - 2)
    type 3:  b1 = g1 * ((n - 1) / n)^(3/2)        (default)

Screening applies a fixed policy per variable: continuous variables whose
absolute skewness exceeds the threshold are log1p-transformed, and excluded
when the transformed skewness still exceeds it; binary variables are
excluded when their minority class falls below the imbalance threshold.
Every variable appears in the report exactly once with the reason for its
decision, and decisions depend only on the variable's own values, never on
the order variables are supplied in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

VariableKind = str  # "continuous" | "binary"

KINDS = ("continuous", "binary")

ACTIONS = ("retained", "transformed", "excluded")


class UndefinedSkewnessError(ValueError):
    """Skewness is undefined for a zero-variance sample."""


def skewness(values: Sequence[float], type: int = 3) -> float:
    """Sample skewness of a 1-d sample.

    Types 2 and 3 rescale the moment coefficient g1 and need at least three
    observations; type 1 needs two.  Zero variance raises
    UndefinedSkewnessError since the coefficient divides by m2^(3/2).
    """
    if type not in (1, 2, 3):
        raise ValueError(f"skewness type must be 1, 2 or 3, got {type}")
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValueError("skewness expects a 1-d sample")
    n = x.size
    min_n = 2 if type == 1 else 3
    if n < min_n:
        raise ValueError(f"skewness type {type} needs at least {min_n} observations, got {n}")
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    if m2 <= 0.0:
        raise UndefinedSkewnessError("skewness undefined: sample variance is zero")
    g1 = m3 / m2**1.5
    if type == 1:
        return g1
    if type == 2:
        return g1 * math.sqrt(n * (n - 1)) / (n - 2)
    return g1 * ((n - 1) / n) ** 1.5


def log1p_transform(values: Sequence[float]) -> np.ndarray:
    """Elementwise log(1 + x); negative inputs are a domain error."""
    x = np.asarray(values, dtype=float)
    if x.size and float(x.min()) < 0.0:
        raise ValueError(f"log1p transform needs non-negative values, got min {float(x.min())}")
    return np.log1p(x)


@dataclass(frozen=True)
class ScreeningConfig:
    skew_threshold: float = 3.0
    minority_threshold: float = 0.05
    skew_type: int = 3


@dataclass(frozen=True)
class ScreeningDecision:
    name: str
    kind: VariableKind
    action: str
    reason: str
    raw_skewness: float | None = None
    transformed_skewness: float | None = None
    minority_fraction: float | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "action": self.action,
            "reason": self.reason,
            "raw_skewness": self.raw_skewness,
            "transformed_skewness": self.transformed_skewness,
            "minority_fraction": self.minority_fraction,
        }


@dataclass
class ScreeningReport:
    config: ScreeningConfig
    decisions: list[ScreeningDecision]

    def decision_for(self, name: str) -> ScreeningDecision:
        for decision in self.decisions:
            if decision.name == name:
                return decision
        raise KeyError(name)

    def retained_names(self) -> list[str]:
        return [d.name for d in self.decisions if d.action != "excluded"]

    def transforms(self) -> dict[str, str]:
        return {d.name: "log1p" for d in self.decisions if d.action == "transformed"}

    def to_json(self) -> dict:
        return {
            "config": {
                "skew_threshold": self.config.skew_threshold,
                "minority_threshold": self.config.minority_threshold,
                "skew_type": self.config.skew_type,
            },
            "variables": [d.to_json() for d in self.decisions],
        }

    def format_table(self) -> str:
        header = f"{'variable':<26} {'kind':<11} {'decision':<12} reason"
        rows = [header, "-" * len(header)]
        for d in self.decisions:
            rows.append(f"{d.name:<26} {d.kind:<11} {d.action:<12} {d.reason}")
        return "\n".join(rows)


def _screen_binary(name: str, values: np.ndarray, config: ScreeningConfig) -> ScreeningDecision:
    bad = set(np.unique(values)) - {0.0, 1.0}
    if bad:
        raise ValueError(f"binary variable {name!r} takes values outside {{0, 1}}: {sorted(bad)}")
    minority = float(min(values.mean(), 1.0 - values.mean()))
    if minority < config.minority_threshold:
        return ScreeningDecision(
            name,
            "binary",
            "excluded",
            f"minority class {minority:.4f} below {config.minority_threshold}",
            minority_fraction=minority,
        )
    return ScreeningDecision(
        name,
        "binary",
        "retained",
        f"minority class {minority:.4f} at or above {config.minority_threshold}",
        minority_fraction=minority,
    )


def _screen_continuous(name: str, values: np.ndarray, config: ScreeningConfig) -> ScreeningDecision:
    try:
        raw = skewness(values, type=config.skew_type)
    except UndefinedSkewnessError:
        return ScreeningDecision(
            name, "continuous", "excluded", "zero variance, skewness undefined"
        )
    if abs(raw) <= config.skew_threshold:
        return ScreeningDecision(
            name,
            "continuous",
            "retained",
            f"|skewness| {abs(raw):.2f} within {config.skew_threshold}",
            raw_skewness=raw,
        )
    transformed = skewness(log1p_transform(values), type=config.skew_type)
    if abs(transformed) > config.skew_threshold:
        return ScreeningDecision(
            name,
            "continuous",
            "excluded",
            f"|skewness| {abs(transformed):.2f} after log1p still above {config.skew_threshold}",
            raw_skewness=raw,
            transformed_skewness=transformed,
        )
    return ScreeningDecision(
        name,
        "continuous",
        "transformed",
        f"log1p brings |skewness| {abs(raw):.2f} down to {abs(transformed):.2f}",
        raw_skewness=raw,
        transformed_skewness=transformed,
    )


def screen_predictors(
    table: Mapping[str, Sequence[float]],
    kinds: Mapping[str, VariableKind],
    config: ScreeningConfig | None = None,
) -> ScreeningReport:
    """Screen every variable in the table, one decision each."""
    config = config or ScreeningConfig()
    decisions = []
    for name, values in table.items():
        kind = kinds.get(name)
        if kind not in KINDS:
            raise ValueError(f"variable {name!r} needs a kind in {KINDS}, got {kind!r}")
        column = np.asarray(values, dtype=float)
        if kind == "binary":
            decisions.append(_screen_binary(name, column, config))
        else:
            decisions.append(_screen_continuous(name, column, config))
    return ScreeningReport(config=config, decisions=decisions)


def write_screening_report(report: ScreeningReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_json(), handle, indent=2, sort_keys=True)
        handle.write("\n")
