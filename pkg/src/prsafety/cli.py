"""Command line interface.

Subcommands mirror the pipeline stages; each stage command recomputes its
prerequisites in memory and writes only its own artifacts, while ``run``
executes everything and writes the manifest.  All options can come from a
JSON config file (--config); explicit flags override file values.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import cues as cues_mod
from . import diagnostics, github_fetch, participation, pipeline, ps_index, reporting

STAGE_COMMANDS = ("ingest", "cues", "screen", "label", "index", "fit", "report", "run")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--corpus", dest="corpus_dir", help="corpus directory")
    parser.add_argument("--out", dest="out_dir", help="output directory for artifacts")
    parser.add_argument("--data-end", help="last observed date, YYYY-MM-DD")
    parser.add_argument("--snapshot-date", help="snapshot date, YYYY-MM-DD")
    parser.add_argument("--window-months", type=int, help="sustain window length")
    parser.add_argument("--recent-horizon-end", help="recent-outcome horizon, YYYY-MM-DD")
    parser.add_argument("--censor-margin-months", type=int, help="censoring margin")
    parser.add_argument("--gap-months", type=int, help="gap-return threshold")
    parser.add_argument("--threshold-scope", choices=ps_index.THRESHOLD_SCOPES)
    parser.add_argument("--merged-only", action="store_true", default=None,
                        help="credit the merge condition only for merged PRs")
    parser.add_argument("--global-activity", action="store_true", default=None,
                        help="build timelines across all repositories")
    parser.add_argument("--unit", choices=("pr", "contributor"), help="regression unit")
    parser.add_argument("--models", help="comma-separated model indices, e.g. 1,2,3")
    parser.add_argument("--emoji-table", dest="emoji_table_path", help="alternate emoji table")
    parser.add_argument("--no-filter", action="store_true", default=None,
                        help="skip star-rank and category filtering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prsafety",
        description="Psychological-safety analytics over pull request corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fetch = sub.add_parser("fetch", help="export one repository via the GitHub REST API")
    fetch.add_argument("--repo", required=True, help="owner/name")
    fetch.add_argument("--out", required=True, help="output corpus directory")
    fetch.add_argument("--since", help="RFC 3339 lower bound for comments and commits")
    fetch.add_argument(
        "--token-env",
        default="GITHUB_TOKEN",
        help="name of the environment variable holding the API token",
    )
    fetch.add_argument("--page-size", type=int, default=100)
    fetch.add_argument("--max-retries", type=int, default=3)

    for name in STAGE_COMMANDS:
        stage = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(stage)

    return parser


def _pipeline_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    overrides: dict = {}
    for key in ("corpus_dir", "out_dir", "threshold_scope", "unit", "emoji_table_path"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    for key in ("merged_only", "global_activity"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "models", None):
        try:
            overrides["models"] = tuple(int(v) for v in str(args.models).split(",") if v)
        except ValueError:
            raise pipeline.ConfigError(f"bad --models value: {args.models!r}") from None

    labeling_overrides = {}
    for arg_name, key in (
        ("data_end", "data_end"),
        ("snapshot_date", "snapshot_date"),
        ("window_months", "window_months"),
        ("recent_horizon_end", "recent_horizon_end"),
        ("censor_margin_months", "censor_margin_months"),
        ("gap_months", "gap_months"),
    ):
        value = getattr(args, arg_name, None)
        if value is not None:
            labeling_overrides[key] = value

    if args.config:
        raw = pipeline.read_config_file(args.config)
    else:
        raw = {}
    if labeling_overrides:
        raw["labeling"] = {**(raw.get("labeling") or {}), **labeling_overrides}
    if getattr(args, "no_filter", None):
        raw["filter"] = None
    elif not args.config and "filter" not in raw:
        raw["filter"] = {}
    return pipeline.config_from_dict(raw, overrides)


def _cmd_fetch(args: argparse.Namespace) -> int:
    job = github_fetch.FetchJob(
        repo_full_name=args.repo,
        output_dir=args.out,
        since=args.since,
        auth_token_source=args.token_env,
        page_size=args.page_size,
        max_retries=args.max_retries,
    )
    report = github_fetch.fetch_repository(job)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0


def _cmd_stage(command: str, args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)

    if command == "run":
        result = pipeline.run_pipeline(config)
        print(f"wrote {len(result.manifest['artifacts']) + 1} artifacts to {out}")
        return 0

    load = pipeline.load_and_filter(config)
    if command == "ingest":
        corpus_mod.write_error_report(load.errors, out / "ingest_errors.jsonl")
        counts = load.corpus.counts()
        print(json.dumps({**counts, "ingest_errors": len(load.errors)}, sort_keys=True))
        return 0

    table = cues_mod.load_emoji_table(config.emoji_table_path)
    cue_rows = cues_mod.extract_all(load.corpus.pulls, table)
    if command == "cues":
        cues_mod.write_cues_csv(out / "cues.csv", cue_rows)
        print(f"wrote cues for {len(cue_rows)} pull requests")
        return 0

    if command == "screen":
        report = pipeline.screen_cues(cue_rows, config.screening)
        diagnostics.write_screening_report(report, out / "screening_report.json")
        print(report.format_table())
        return 0

    contributors = {(p.repo_full_name, p.author) for p in load.corpus.pulls}
    labeling = participation.label_contributors(
        load.corpus.commits, contributors, config.labeling, global_activity=config.global_activity
    )
    if command == "label":
        participation.write_labels_csv(out / "labels.csv", labeling.labels)
        print(f"labeled {len(labeling.labels)} contributors, {len(labeling.unlabeled)} unlabeled")
        return 0

    pairs = [(pull.repo_full_name, vector) for pull, vector in cue_rows]
    thresholds = ps_index.compute_thresholds(pairs, scope=config.threshold_scope)
    summary = ps_index.summarize(cue_rows, labeling.labels, thresholds, merged_only=config.merged_only)
    if command == "index":
        ps_index.write_repository_csv(out / "ps_index_repository.csv", summary)
        ps_index.write_contributor_csv(out / "ps_index_contributor.csv", summary)
        print(reporting.format_index_table(summary.repository_index))
        return 0

    # fit and report both need models; reuse the full pipeline for artifact
    # consistency (it rewrites every stage artifact deterministically).
    result = pipeline.run_pipeline(config)
    if command == "fit":
        for index in sorted(result.fits):
            fit = result.fits[index]
            print(f"model_{index}: n={fit.n_observations} ll={fit.log_likelihood:.2f} aic={fit.aic:.2f}")
        for index in sorted(result.model_failures):
            print(f"model_{index}: no finite fit ({result.model_failures[index]})")
        return 0
    print((out / "report.txt").read_text("utf-8"))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fetch":
            return _cmd_fetch(args)
        return _cmd_stage(args.command, args)
    except (pipeline.ConfigError, participation.LabelingConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (
        corpus_mod.CorpusError,
        github_fetch.FetchError,
        cues_mod.EmojiTableError,
        diagnostics.UndefinedSkewnessError,
        OSError,
        ValueError,
        RuntimeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
