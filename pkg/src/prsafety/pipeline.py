"""End-to-end pipeline: ingest, cues, screen, label, index, fit, report.

Every run is deterministic: identical configuration and corpus bytes give
byte-identical artifacts.  Manifests therefore carry no wall-clock fields,
only the configuration hash, the emoji table version, thresholds, screening
decisions and row counts.

Artifacts written under the output directory:

    ingest_errors.jsonl        per-line validation failures
    cues.csv                   13 cues per pull request
    screening_report.json      one decision per screened variable
    labels.csv                 participation status per (repo, author)
    ps_index_repository.csv    repository index, three decimals, descending
    ps_index_contributor.csv   contributor index
    model_<k>.json             full fit per model
    models_table.csv           side-by-side coefficient table
    report.txt                 human-readable summary
    manifest.json              reproducibility record
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import corpus as corpus_mod
from . import cues as cues_mod
from . import diagnostics, glm, participation, ps_index, reporting


class ConfigError(ValueError):
    """Invalid pipeline configuration; maps to exit code 2 in the CLI."""


class StageError(RuntimeError):
    """A pipeline stage failed after partial artifacts were written."""


CUE_KINDS: dict[str, str] = {
    "merged_or_not": "binary",
    "pr_comment_num": "continuous",
    "reopen_num": "continuous",
    "has_exchange": "binary",
    "comment_conflict": "binary",
    "contrib_comment": "binary",
    "num_comments_con": "continuous",
    "inte_comment": "binary",
    "reviewer_comment": "binary",
    "other_comment": "binary",
    "num_participant": "continuous",
    "at_tag": "binary",
    "emoji_count": "continuous",
}

CONTINUOUS_CONTROLS = ("contrib_rate_author", "followers", "num_languages", "social_strength")

# The seven stage artifacts every run writes; model_<k>.json, report.txt and
# manifest.json come on top.
ARTIFACT_FILES = (
    "ingest_errors.jsonl",
    "cues.csv",
    "screening_report.json",
    "labels.csv",
    "ps_index_repository.csv",
    "ps_index_contributor.csv",
    "models_table.csv",
)


@dataclass
class PipelineConfig:
    corpus_dir: Path
    out_dir: Path
    labeling: participation.LabelingConfig
    filter: corpus_mod.FilterConfig | None = None
    screening: diagnostics.ScreeningConfig = field(default_factory=diagnostics.ScreeningConfig)
    threshold_scope: str = "global"
    merged_only: bool = False
    global_activity: bool = False
    unit: str = "pr"
    models: tuple[int, ...] = (1, 2, 3)
    emoji_table_path: Path | None = None

    def __post_init__(self) -> None:
        if self.unit not in ("pr", "contributor"):
            raise ConfigError(f"unit must be 'pr' or 'contributor', got {self.unit!r}")
        if self.threshold_scope not in ps_index.THRESHOLD_SCOPES:
            raise ConfigError(f"threshold_scope must be one of {ps_index.THRESHOLD_SCOPES}")
        if not self.models:
            raise ConfigError("at least one model index is required")
        if not set(self.models) <= {1, 2, 3}:
            raise ConfigError(f"model indices must be from (1, 2, 3), got {self.models}")

    def to_json(self) -> dict:
        return {
            "corpus_dir": str(self.corpus_dir),
            "out_dir": str(self.out_dir),
            "labeling": {
                "data_end": self.labeling.data_end.isoformat(),
                "snapshot_date": self.labeling.snapshot_date.isoformat(),
                "window_months": self.labeling.window_months,
                "recent_horizon_end": self.labeling.recent_horizon_end.isoformat(),
                "censor_margin_months": self.labeling.censor_margin_months,
                "gap_months": self.labeling.gap_months,
            },
            "filter": None
            if self.filter is None
            else {
                "top_n_by_stars": self.filter.top_n_by_stars,
                "excluded_labels": sorted(self.filter.excluded_labels),
            },
            "screening": {
                "skew_threshold": self.screening.skew_threshold,
                "minority_threshold": self.screening.minority_threshold,
                "skew_type": self.screening.skew_type,
            },
            "threshold_scope": self.threshold_scope,
            "merged_only": self.merged_only,
            "global_activity": self.global_activity,
            "unit": self.unit,
            "models": list(self.models),
            "emoji_table_path": None if self.emoji_table_path is None else str(self.emoji_table_path),
        }


def _parse_date(value, name: str):
    from datetime import date

    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{name} must be an ISO date (YYYY-MM-DD), got {value!r}") from None


def config_from_dict(raw: Mapping, overrides: Mapping | None = None) -> PipelineConfig:
    """Build a PipelineConfig from a JSON-shaped mapping plus CLI overrides."""
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    corpus_dir = merged.get("corpus_dir")
    if not corpus_dir:
        raise ConfigError("corpus_dir is required")
    out_dir = merged.get("out_dir")
    if not out_dir:
        raise ConfigError("out_dir is required (use --out)")

    labeling_raw = dict(merged.get("labeling") or {})
    if "data_end" not in labeling_raw:
        raise ConfigError("labeling.data_end is required")
    try:
        labeling = participation.LabelingConfig(
            data_end=_parse_date(labeling_raw["data_end"], "labeling.data_end"),
            snapshot_date=_parse_date(
                labeling_raw.get("snapshot_date", "2019-06-30"), "labeling.snapshot_date"
            ),
            window_months=int(labeling_raw.get("window_months", 12)),
            recent_horizon_end=_parse_date(
                labeling_raw.get("recent_horizon_end", "2024-12-31"),
                "labeling.recent_horizon_end",
            ),
            censor_margin_months=int(labeling_raw.get("censor_margin_months", 12)),
            gap_months=int(labeling_raw.get("gap_months", 12)),
        )
    except participation.LabelingConfigError as exc:
        raise ConfigError(str(exc)) from None

    filter_raw = merged.get("filter")
    filter_config = None
    if filter_raw is not None:
        filter_config = corpus_mod.FilterConfig(
            top_n_by_stars=int(filter_raw.get("top_n_by_stars", 200)),
            excluded_labels=frozenset(
                filter_raw.get("excluded_labels", corpus_mod.DEFAULT_EXCLUDED_LABELS)
            ),
        )

    screening_raw = dict(merged.get("screening") or {})
    screening = diagnostics.ScreeningConfig(
        skew_threshold=float(screening_raw.get("skew_threshold", 3.0)),
        minority_threshold=float(screening_raw.get("minority_threshold", 0.05)),
        skew_type=int(screening_raw.get("skew_type", 3)),
    )

    try:
        return PipelineConfig(
            corpus_dir=Path(corpus_dir),
            out_dir=Path(out_dir),
            labeling=labeling,
            filter=filter_config,
            screening=screening,
            threshold_scope=str(merged.get("threshold_scope", "global")),
            merged_only=bool(merged.get("merged_only", False)),
            global_activity=bool(merged.get("global_activity", False)),
            unit=str(merged.get("unit", "pr")),
            models=tuple(merged.get("models", (1, 2, 3))),
            emoji_table_path=Path(merged["emoji_table_path"])
            if merged.get("emoji_table_path")
            else None,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def read_config_file(path: str | Path) -> dict:
    """Read a config file into a raw mapping, without validating it yet."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return dict(raw)


def load_config_file(path: str | Path, overrides: Mapping | None = None) -> PipelineConfig:
    return config_from_dict(read_config_file(path), overrides)


def config_hash(config: PipelineConfig) -> str:
    canonical = json.dumps(config.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class PipelineResult:
    config: PipelineConfig
    corpus: corpus_mod.Corpus
    ingest_errors: list
    cue_rows: list
    screening_report: diagnostics.ScreeningReport
    labeling: participation.LabelingOutcome
    thresholds: ps_index.Thresholds
    summary: ps_index.PsSummary
    fits: dict[int, glm.LogisticFit]
    specs: dict[int, glm.ModelSpec]
    vifs: dict[int, dict[str, float]]
    model_failures: dict[int, str]
    control_transforms: dict[str, str]
    manifest: dict


def load_and_filter(config: PipelineConfig) -> corpus_mod.LoadResult:
    if not config.corpus_dir.is_dir():
        raise ConfigError(f"corpus path does not exist: {config.corpus_dir}")
    try:
        result = corpus_mod.load_corpus(config.corpus_dir)
    except corpus_mod.CorpusError as exc:
        raise ConfigError(str(exc)) from None
    if config.filter is not None:
        result = corpus_mod.LoadResult(
            corpus=corpus_mod.filter_repositories(result.corpus, config.filter),
            errors=result.errors,
        )
    return result


def screen_cues(
    cue_rows: Sequence[tuple[corpus_mod.PullRequestRecord, cues_mod.CueVector]],
    config: diagnostics.ScreeningConfig,
) -> diagnostics.ScreeningReport:
    table = {
        name: [getattr(vector, name) for _, vector in cue_rows] for name in cues_mod.CUE_NAMES
    }
    return diagnostics.screen_predictors(table, CUE_KINDS, config)


def _model_rows(
    corpus: corpus_mod.Corpus,
    cue_rows: Sequence[tuple[corpus_mod.PullRequestRecord, cues_mod.CueVector]],
    labeling: participation.LabelingOutcome,
    summary: ps_index.PsSummary,
    unit: str,
) -> list[dict]:
    """One analysis row per PR (or per contributor when collapsed).

    Rows carry the outcome variables, the repository index and the control
    block.  Values that are unavailable (no label, no context, no index)
    stay None and are dropped by the design encoder, which counts them.
    """
    contexts = {(c.repo_full_name, c.author): c for c in corpus.contexts}
    metas = {m.repo_full_name: m for m in corpus.repos}
    rows = []
    seen_contributors: set[tuple[str, str]] = set()
    for pull, _vector in cue_rows:
        key = (pull.repo_full_name, pull.author)
        if unit == "contributor":
            if key in seen_contributors:
                continue
            seen_contributors.add(key)
        label = labeling.labels.get(key)
        context = contexts.get(key)
        meta = metas.get(pull.repo_full_name)
        rows.append(
            {
                "repo_full_name": pull.repo_full_name,
                "pr_number": pull.pr_number,
                "author": pull.author,
                "sustainedp_or_not_12": None if label is None else label.sustainedp_or_not_12,
                "recent_sustainedp_or_not": None if label is None else label.recent_sustainedp_or_not,
                "PS_index_repository": summary.repository_index.get(pull.repo_full_name),
                "core_member": None if context is None else int(context.core_member),
                "contrib_rate_author": None if context is None else context.contrib_rate_author,
                "followers": None if context is None else context.followers,
                "num_languages": None if context is None else context.num_languages,
                "contrib_follow_integrator": None
                if context is None
                else int(context.contrib_follow_integrator),
                "social_strength": None if context is None else context.social_strength,
                "repo_size": None if meta is None else meta.repo_size,
            }
        )
    return rows


def _control_transforms(
    rows: Sequence[Mapping], screening_config: diagnostics.ScreeningConfig
) -> dict[str, str]:
    """Screen continuous controls for transforms only; controls always stay."""
    transforms: dict[str, str] = {}
    for name in CONTINUOUS_CONTROLS:
        values = [row[name] for row in rows if row.get(name) is not None]
        if len(values) < 3:
            continue
        try:
            raw = diagnostics.skewness(values, type=screening_config.skew_type)
        except diagnostics.UndefinedSkewnessError:
            continue
        if abs(raw) > screening_config.skew_threshold and min(values) >= 0:
            transforms[name] = "log1p"
    return transforms


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute all stages in order and write every artifact."""
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)

    # ingest
    load = load_and_filter(config)
    corpus = load.corpus
    corpus_mod.write_error_report(load.errors, out / "ingest_errors.jsonl")

    # cues
    table = cues_mod.load_emoji_table(config.emoji_table_path)
    cue_rows = cues_mod.extract_all(corpus.pulls, table)
    cues_mod.write_cues_csv(out / "cues.csv", cue_rows)

    # screen
    report = screen_cues(cue_rows, config.screening)
    diagnostics.write_screening_report(report, out / "screening_report.json")

    # label
    contributors = {(p.repo_full_name, p.author) for p in corpus.pulls}
    labeling = participation.label_contributors(
        corpus.commits, contributors, config.labeling, global_activity=config.global_activity
    )
    participation.write_labels_csv(out / "labels.csv", labeling.labels)

    # index
    pairs = [(pull.repo_full_name, vector) for pull, vector in cue_rows]
    thresholds = ps_index.compute_thresholds(pairs, scope=config.threshold_scope)
    summary = ps_index.summarize(cue_rows, labeling.labels, thresholds, merged_only=config.merged_only)
    ps_index.write_repository_csv(out / "ps_index_repository.csv", summary)
    ps_index.write_contributor_csv(out / "ps_index_contributor.csv", summary)

    # fit
    rows = _model_rows(corpus, cue_rows, labeling, summary, config.unit)
    control_transforms = _control_transforms(rows, config.screening)
    all_specs = {i + 1: spec for i, spec in enumerate(glm.canned_model_specs(control_transforms))}
    fits: dict[int, glm.LogisticFit] = {}
    specs: dict[int, glm.ModelSpec] = {}
    vifs: dict[int, dict[str, float]] = {}
    dropped: dict[int, int] = {}
    model_failures: dict[int, str] = {}
    for index in sorted(config.models):
        spec = all_specs[index]
        specs[index] = spec
        try:
            design = glm.encode_design(rows, spec)
            fit = glm.fit_logistic(design.X, design.y, design.columns)
        except (glm.DesignError, glm.SeparationError) as exc:
            # A model without a finite fit is a reported outcome, not a crash;
            # the other models still run and the record stays deterministic.
            model_failures[index] = str(exc)
            reporting.write_model_failure_json(out / f"model_{index}.json", spec, str(exc))
            continue
        fits[index] = fit
        vifs[index] = glm.vif(design.X, design.columns)
        dropped[index] = design.n_dropped
        reporting.write_model_json(out / f"model_{index}.json", fit, spec)
    titles = [f"Model {i}" for i in sorted(fits)]
    ordered_fits = [fits[i] for i in sorted(fits)]
    reporting.write_models_csv(out / "models_table.csv", ordered_fits, titles)

    # report
    failure_notes = [
        f"{all_specs[i].name} has no finite fit: {model_failures[i]}"
        for i in sorted(model_failures)
    ]
    report_text = reporting.render_report(
        summary,
        ordered_fits,
        titles,
        screening_table=report.format_table(),
        model_notes=failure_notes,
    )
    (out / "report.txt").write_text(report_text, encoding="utf-8")

    # manifest
    manifest = {
        "tool": "prsafety",
        "config": config.to_json(),
        "config_hash": config_hash(config),
        "emoji_table_version": table.version,
        "thresholds": {
            "scope": thresholds.scope,
            "global": thresholds.global_medians,
            "per_repository": thresholds.per_repository,
        },
        "screening": report.to_json(),
        "control_transforms": control_transforms,
        "role_provenance": "stored",
        "row_counts": {
            **corpus.counts(),
            "ingest_errors": len(load.errors),
            "labeled_contributors": len(labeling.labels),
            "unlabeled_contributors": len(labeling.unlabeled),
            "scored_prs": len(summary.pr_scores),
            "skipped_prs": len(summary.skipped_prs),
            "model_rows_dropped": dropped,
        },
        "vif": {
            "threshold": 5.0,
            "per_model": {str(i): vifs[i] for i in sorted(vifs)},
            "all_below_threshold": all(glm.vif_gate(v) for v in vifs.values()),
        },
        "notes": [ps_index.OUTCOME_COUPLING_NOTE] + failure_notes,
        "model_failures": {str(i): model_failures[i] for i in sorted(model_failures)},
        "artifacts": sorted(
            p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json"
        ),
        "failure": None
        if fits
        else {"stage": "fit", "detail": "no requested model has a finite fit"},
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")

    if not fits:
        raise StageError(
            "fit stage failed: no requested model has a finite fit; "
            f"see {out / 'manifest.json'}"
        )

    return PipelineResult(
        config=config,
        corpus=corpus,
        ingest_errors=load.errors,
        cue_rows=cue_rows,
        screening_report=report,
        labeling=labeling,
        thresholds=thresholds,
        summary=summary,
        fits=fits,
        specs=specs,
        vifs=vifs,
        model_failures=model_failures,
        control_transforms=control_transforms,
        manifest=manifest,
    )
