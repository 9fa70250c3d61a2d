from __future__ import annotations

import json

import pytest

from conftest import CORPUS12_DATA_END
from prsafety import cli, github_fetch, pipeline


def _run_args(corpus_dir, out_dir, *extra):
    return [
        "--corpus", str(corpus_dir),
        "--out", str(out_dir),
        "--data-end", "2025-06-30",
        "--no-filter",
        *extra,
    ]


# --- run ---------------------------------------------------------------------------

def test_run_writes_every_artifact(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", *_run_args(small_corpus_dir, out)]) == 0
    stdout = capsys.readouterr().out
    assert f"wrote 12 artifacts to {out}" in stdout
    for name in pipeline.ARTIFACT_FILES:
        assert (out / name).is_file(), name
    for name in ("model_1.json", "model_2.json", "model_3.json", "report.txt", "manifest.json"):
        assert (out / name).is_file(), name
    manifest = json.loads((out / "manifest.json").read_text("utf-8"))
    assert list(manifest["model_failures"]) == ["3"]  # recorded, but not fatal


def test_run_exit_1_when_no_model_fits(corpus12_dir, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main([
        "run",
        "--corpus", str(corpus12_dir),
        "--out", str(out),
        "--data-end", CORPUS12_DATA_END.isoformat(),
        "--no-filter",
    ])
    assert code == 1
    assert "no requested model has a finite fit" in capsys.readouterr().err
    manifest = json.loads((out / "manifest.json").read_text("utf-8"))
    assert manifest["failure"]["stage"] == "fit"


def test_missing_corpus_is_exit_2(tmp_path, capsys):
    code = cli.main(["run", *_run_args(tmp_path / "nowhere", tmp_path / "out")])
    assert code == 2
    assert "nowhere" in capsys.readouterr().err


def test_bad_flag_values_are_exit_2(small_corpus_dir, tmp_path, capsys):
    base = _run_args(small_corpus_dir, tmp_path / "out")
    assert cli.main(["run", *base, "--models", "1,x"]) == 2
    assert "bad --models" in capsys.readouterr().err
    assert cli.main(["run", *base, "--models", "9"]) == 2
    assert "model indices" in capsys.readouterr().err
    assert cli.main(["run", *base, "--data-end", "someday"]) == 2
    assert "ISO date" in capsys.readouterr().err
    assert cli.main(["run", *base, "--data-end", "2019-01-01"]) == 2
    assert "precede" in capsys.readouterr().err


def test_missing_out_dir_is_exit_2(small_corpus_dir, capsys):
    code = cli.main([
        "run", "--corpus", str(small_corpus_dir), "--data-end", "2025-06-30", "--no-filter",
    ])
    assert code == 2
    assert "out_dir" in capsys.readouterr().err


def test_model_subset_flag(small_corpus_dir, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", *_run_args(small_corpus_dir, out), "--models", "1,2"]) == 0
    assert (out / "model_2.json").is_file()
    assert not (out / "model_3.json").exists()
    manifest = json.loads((out / "manifest.json").read_text("utf-8"))
    assert manifest["model_failures"] == {}


def test_separated_model_alone_is_exit_1(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", *_run_args(small_corpus_dir, out), "--models", "3"])
    assert code == 1
    assert "no requested model has a finite fit" in capsys.readouterr().err
    payload = json.loads((out / "model_3.json").read_text("utf-8"))
    assert payload["error"].startswith("quasi-separation")


# --- config files ------------------------------------------------------------------

def test_config_file_with_out_override(small_corpus_dir, tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "corpus_dir": str(small_corpus_dir),
                "labeling": {"data_end": "2025-06-30"},
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "from_cli"
    assert cli.main(["run", "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "manifest.json").is_file()


def test_config_file_flag_overrides_values(small_corpus_dir, tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "corpus_dir": str(small_corpus_dir),
                "out_dir": str(tmp_path / "ignored"),
                "labeling": {"data_end": "2025-06-30"},
                "models": [1, 2, 3],
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "actual"
    code = cli.main(["run", "--config", str(config_path), "--out", str(out), "--models", "1"])
    assert code == 0
    assert (out / "model_1.json").is_file()
    assert not (out / "model_2.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_missing_config_file_is_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


# --- stage subcommands ------------------------------------------------------------------

def test_ingest_stage(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["ingest", *_run_args(small_corpus_dir, out)]) == 0
    counts = json.loads(capsys.readouterr().out)
    assert counts["pulls"] == 610
    assert counts["ingest_errors"] == 0
    assert (out / "ingest_errors.jsonl").is_file()
    assert not (out / "cues.csv").exists()


def test_cues_stage(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["cues", *_run_args(small_corpus_dir, out)]) == 0
    assert "610 pull requests" in capsys.readouterr().out
    header = (out / "cues.csv").read_text("utf-8").splitlines()[0]
    assert header.startswith("repo_full_name,pr_number,merged_or_not")


def test_screen_stage(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["screen", *_run_args(small_corpus_dir, out)]) == 0
    stdout = capsys.readouterr().out
    assert "variable" in stdout and "decision" in stdout
    payload = json.loads((out / "screening_report.json").read_text("utf-8"))
    assert len(payload["variables"]) == 13


def test_label_stage(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["label", *_run_args(small_corpus_dir, out)]) == 0
    assert "labeled 50 contributors" in capsys.readouterr().out
    lines = (out / "labels.csv").read_text("utf-8").splitlines()
    assert len(lines) == 51


def test_index_stage(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["index", *_run_args(small_corpus_dir, out)]) == 0
    assert "PS Index" in capsys.readouterr().out
    assert (out / "ps_index_repository.csv").is_file()
    assert (out / "ps_index_contributor.csv").is_file()


def test_fit_stage_reports_failures_too(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["fit", *_run_args(small_corpus_dir, out)]) == 0
    stdout = capsys.readouterr().out
    assert "model_1: n=543" in stdout
    assert "model_2: n=543" in stdout
    assert "model_3: no finite fit" in stdout


def test_report_stage_prints_report(small_corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["report", *_run_args(small_corpus_dir, out)]) == 0
    stdout = capsys.readouterr().out
    assert "PS index by repository (0-10 scale)" in stdout
    assert "Sustained participation models" in stdout


# --- fetch wiring ---------------------------------------------------------------------

def test_fetch_maps_flags_to_job(tmp_path, capsys, monkeypatch):
    captured = {}

    def fake_fetch(job, fetcher=None):
        captured["job"] = job
        return github_fetch.FetchReport(repo_full_name=job.repo_full_name, pulls=3)

    monkeypatch.setattr(cli.github_fetch, "fetch_repository", fake_fetch)
    code = cli.main([
        "fetch",
        "--repo", "acme/site",
        "--out", str(tmp_path / "corpus"),
        "--token-env", "MY_EXPORT_TOKEN",
        "--page-size", "50",
        "--max-retries", "5",
        "--since", "2019-01-01T00:00:00Z",
    ])
    assert code == 0
    job = captured["job"]
    assert job.repo_full_name == "acme/site"
    assert job.auth_token_source == "MY_EXPORT_TOKEN"
    assert job.page_size == 50
    assert job.max_retries == 5
    assert job.since == "2019-01-01T00:00:00Z"
    assert json.loads(capsys.readouterr().out)["pulls"] == 3


def test_fetch_failure_is_exit_1(tmp_path, capsys, monkeypatch):
    def fake_fetch(job, fetcher=None):
        raise github_fetch.RepoNotFoundError("acme/site: GET /repos/acme/site returned 404")

    monkeypatch.setattr(cli.github_fetch, "fetch_repository", fake_fetch)
    assert cli.main(["fetch", "--repo", "acme/site", "--out", str(tmp_path)]) == 1
    assert "404" in capsys.readouterr().err
