"""Plain-text and CSV rendering of index tables and regression results.

Coefficient cells render as "beta(se)stars", for example "1.03(0.02)***".
Odds ratios print with two decimals below ten and three significant digits
from ten up, so 46.525 renders as "46.5".  Index tables print three
decimals, highest repository first.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

from .glm import INTERCEPT_NAME, LogisticFit, ModelSpec, odds_ratios, significance_stars
from .ps_index import OUTCOME_COUPLING_NOTE, PsSummary

CRITERIA_ROWS = ("AIC", "BIC", "Log Likelihood", "Deviance", "Num. obs.")


def format_coefficient_cell(beta: float, se: float, p_value: float) -> str:
    return f"{beta:.2f}({se:.2f}){significance_stars(p_value)}"


def format_odds_ratio(value: float) -> str:
    if value < 10.0:
        return f"{value:.2f}"
    return f"{value:.3g}"


def format_index_value(value: float) -> str:
    return f"{value:.3f}"


def format_index_table(repository_index: Mapping[str, float]) -> str:
    """Repository index table, three decimals, descending."""
    ordered = sorted(repository_index.items(), key=lambda kv: (-kv[1], kv[0]))
    width = max([len("owner/repository name")] + [len(name) for name in repository_index])
    lines = [f"{'owner/repository name':<{width}}  PS Index"]
    lines.append("-" * (width + 10))
    for repo, value in ordered:
        lines.append(f"{repo:<{width}}  {format_index_value(value):>8}")
    return "\n".join(lines)


def _term_order(fits: Sequence[LogisticFit]) -> list[str]:
    terms: list[str] = []
    for fit in fits:
        for name in fit.columns:
            if name not in terms:
                terms.append(name)
    # Intercept always leads regardless of per-model column order.
    if INTERCEPT_NAME in terms:
        terms.remove(INTERCEPT_NAME)
        terms.insert(0, INTERCEPT_NAME)
    return terms


def _criteria_value(fit: LogisticFit, row: str) -> str:
    if row == "AIC":
        return f"{fit.aic:.2f}"
    if row == "BIC":
        return f"{fit.bic:.2f}"
    if row == "Log Likelihood":
        return f"{fit.log_likelihood:.2f}"
    if row == "Deviance":
        return f"{fit.deviance:.2f}"
    return str(fit.n_observations)


def format_models_table(fits: Sequence[LogisticFit], titles: Sequence[str] | None = None) -> str:
    """Side-by-side regression table with beta(se)stars and OR columns."""
    if not fits:
        raise ValueError("no fits to render")
    titles = list(titles) if titles is not None else [f"Model {i}" for i in range(1, len(fits) + 1)]
    if len(titles) != len(fits):
        raise ValueError("one title per fit required")

    terms = _term_order(fits)
    cells: dict[str, list[tuple[str, str]]] = {term: [] for term in terms}
    for fit in fits:
        rows = {row.name: row for row in odds_ratios(fit)}
        for term in terms:
            if term in rows:
                row = rows[term]
                cells[term].append(
                    (
                        format_coefficient_cell(row.coefficient, row.standard_error, row.p_value),
                        format_odds_ratio(row.odds_ratio),
                    )
                )
            else:
                cells[term].append(("", ""))

    name_width = max(len(t) for t in terms + list(CRITERIA_ROWS))
    col_widths = []
    for i, title in enumerate(titles):
        beta_w = max([len(f"{title} beta(SE)")] + [len(cells[t][i][0]) for t in terms])
        or_w = max([len("OR")] + [len(cells[t][i][1]) for t in terms] + [len(_criteria_value(fits[i], r)) for r in CRITERIA_ROWS])
        col_widths.append((beta_w, or_w))

    def line(term_label: str, pairs: Sequence[tuple[str, str]]) -> str:
        parts = [f"{term_label:<{name_width}}"]
        for (beta_cell, or_cell), (beta_w, or_w) in zip(pairs, col_widths):
            parts.append(f"{beta_cell:>{beta_w}}  {or_cell:>{or_w}}")
        return "  ".join(parts)

    header = line("", [(f"{t} beta(SE)", "OR") for t in titles])
    rule = "-" * len(header)
    body = [line(term, cells[term]) for term in terms]
    criteria = [
        line(row, [("", _criteria_value(fit, row)) for fit in fits]) for row in CRITERIA_ROWS
    ]
    footnote = "*** p<0.001, ** p<0.01, * p<0.05"
    return "\n".join([header, rule] + body + [rule] + criteria + [rule, footnote])


def write_models_csv(path: str | Path, fits: Sequence[LogisticFit], titles: Sequence[str] | None = None) -> None:
    titles = list(titles) if titles is not None else [f"Model {i}" for i in range(1, len(fits) + 1)]
    terms = _term_order(fits)
    header = ["term"]
    for title in titles:
        header += [f"{title} beta(SE)", f"{title} OR"]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for term in terms:
            row = [term]
            for fit in fits:
                if term in fit.columns:
                    j = fit.columns.index(term)
                    row.append(
                        format_coefficient_cell(
                            float(fit.coefficients[j]),
                            float(fit.standard_errors[j]),
                            float(fit.p_values[j]),
                        )
                    )
                    row.append(format_odds_ratio(math.exp(float(fit.coefficients[j]))))
                else:
                    row += ["", ""]
            writer.writerow(row)
        for crit in CRITERIA_ROWS:
            row = [crit]
            for fit in fits:
                row += ["", _criteria_value(fit, crit)]
            writer.writerow(row)


def write_model_json(path: str | Path, fit: LogisticFit, spec: ModelSpec) -> None:
    payload = fit.to_json()
    payload["model"] = spec.name
    payload["outcome"] = spec.outcome
    payload["predictors"] = list(spec.predictors)
    payload["transforms"] = dict(spec.transforms)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_model_failure_json(path: str | Path, spec: ModelSpec, message: str) -> None:
    """Record a model that has no finite fit, keeping the artifact set stable."""
    payload = {
        "model": spec.name,
        "outcome": spec.outcome,
        "predictors": list(spec.predictors),
        "transforms": dict(spec.transforms),
        "error": message,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def render_report(
    summary: PsSummary,
    fits: Sequence[LogisticFit],
    titles: Sequence[str] | None = None,
    screening_table: str | None = None,
    model_notes: Sequence[str] = (),
) -> str:
    sections = [
        "PS index by repository (0-10 scale)",
        "",
        format_index_table(summary.repository_index),
        "",
        "Note: " + OUTCOME_COUPLING_NOTE,
    ]
    if screening_table:
        sections += ["", "Predictor screening", "", screening_table]
    if fits:
        sections += ["", "Sustained participation models", "", format_models_table(fits, titles)]
    for note in model_notes:
        sections += ["", "Note: " + note]
    return "\n".join(sections) + "\n"
