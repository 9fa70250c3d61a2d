from __future__ import annotations

import hashlib
import json
from datetime import date
from pathlib import Path

import pytest

from conftest import CORPUS12_DATA_END
from prsafety import pipeline
from prsafety.participation import LabelingConfig
from prsafety.ps_index import OUTCOME_COUPLING_NOTE


def _config(corpus_dir, out_dir, **overrides):
    kwargs = dict(
        corpus_dir=Path(corpus_dir),
        out_dir=Path(out_dir),
        labeling=LabelingConfig(data_end=date(2025, 6, 30)),
        filter=None,
    )
    kwargs.update(overrides)
    return pipeline.PipelineConfig(**kwargs)


def _checksums(directory: Path) -> dict[str, str]:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.iterdir())
        if p.is_file()
    }


# --- configuration ------------------------------------------------------------------

def test_config_requires_valid_fields(tmp_path):
    with pytest.raises(pipeline.ConfigError, match="unit"):
        _config(tmp_path, tmp_path, unit="team")
    with pytest.raises(pipeline.ConfigError, match="threshold_scope"):
        _config(tmp_path, tmp_path, threshold_scope="daily")
    with pytest.raises(pipeline.ConfigError, match="at least one model"):
        _config(tmp_path, tmp_path, models=())
    with pytest.raises(pipeline.ConfigError, match="model indices"):
        _config(tmp_path, tmp_path, models=(1, 4))


def test_config_from_dict_requirements(tmp_path):
    with pytest.raises(pipeline.ConfigError, match="corpus_dir"):
        pipeline.config_from_dict({"out_dir": "o", "labeling": {"data_end": "2025-01-01"}})
    with pytest.raises(pipeline.ConfigError, match="out_dir"):
        pipeline.config_from_dict({"corpus_dir": "c", "labeling": {"data_end": "2025-01-01"}})
    with pytest.raises(pipeline.ConfigError, match="data_end"):
        pipeline.config_from_dict({"corpus_dir": "c", "out_dir": "o"})
    with pytest.raises(pipeline.ConfigError, match="ISO date"):
        pipeline.config_from_dict(
            {"corpus_dir": "c", "out_dir": "o", "labeling": {"data_end": "soon"}}
        )
    # labeling inconsistencies surface as configuration errors, not crashes
    with pytest.raises(pipeline.ConfigError, match="precede"):
        pipeline.config_from_dict(
            {
                "corpus_dir": "c",
                "out_dir": "o",
                "labeling": {"data_end": "2019-01-01"},
            }
        )


def test_overrides_beat_file_values():
    raw = {
        "corpus_dir": "from_file",
        "out_dir": "from_file_out",
        "labeling": {"data_end": "2025-06-30"},
        "merged_only": False,
    }
    config = pipeline.config_from_dict(raw, {"out_dir": "cli_out", "merged_only": True})
    assert config.out_dir == Path("cli_out")
    assert config.corpus_dir == Path("from_file")
    assert config.merged_only is True


def test_read_config_file_errors(tmp_path):
    with pytest.raises(pipeline.ConfigError, match="not found"):
        pipeline.read_config_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(pipeline.ConfigError, match="not valid JSON"):
        pipeline.read_config_file(bad)
    array = tmp_path / "array.json"
    array.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(pipeline.ConfigError, match="JSON object"):
        pipeline.read_config_file(array)
    good = tmp_path / "good.json"
    good.write_text('{"corpus_dir": "c"}', encoding="utf-8")
    assert pipeline.read_config_file(good) == {"corpus_dir": "c"}


def test_config_hash_tracks_content(tmp_path):
    a = _config(tmp_path, tmp_path / "o")
    b = _config(tmp_path, tmp_path / "o")
    c = _config(tmp_path, tmp_path / "o", merged_only=True)
    assert pipeline.config_hash(a) == pipeline.config_hash(b)
    assert pipeline.config_hash(a) != pipeline.config_hash(c)
    assert len(pipeline.config_hash(a)) == 64


def test_missing_corpus_dir_is_config_error(tmp_path):
    config = _config(tmp_path / "nowhere", tmp_path / "out")
    with pytest.raises(pipeline.ConfigError, match="nowhere"):
        pipeline.load_and_filter(config)


# --- full runs -------------------------------------------------------------------------

def test_small_corpus_run_end_to_end(small_corpus_dir, tmp_path):
    out = tmp_path / "out"
    result = pipeline.run_pipeline(_config(small_corpus_dir, out))

    assert sorted(result.fits) == [1, 2]
    assert list(result.model_failures) == [3]
    assert "quasi-separation" in result.model_failures[3]

    for name in pipeline.ARTIFACT_FILES:
        assert (out / name).is_file(), name
    for extra in ("model_1.json", "model_2.json", "model_3.json", "report.txt", "manifest.json"):
        assert (out / extra).is_file(), extra

    manifest = json.loads((out / "manifest.json").read_text("utf-8"))
    assert manifest["config_hash"] == pipeline.config_hash(result.config)
    assert manifest["emoji_table_version"] == "1"
    assert manifest["thresholds"]["scope"] == "global"
    assert set(manifest["thresholds"]["global"]) == {
        "pr_comment_num", "num_comments_con", "num_participant",
    }
    assert len(manifest["screening"]["variables"]) == 13
    assert manifest["role_provenance"] == "stored"
    assert manifest["row_counts"]["pulls"] == 610
    assert manifest["row_counts"]["labeled_contributors"] == 50
    assert manifest["vif"]["threshold"] == 5.0
    assert set(manifest["vif"]["per_model"]) == {"1", "2"}
    assert isinstance(manifest["vif"]["all_below_threshold"], bool)
    assert manifest["notes"][0] == OUTCOME_COUPLING_NOTE
    assert any("model_3 has no finite fit" in note for note in manifest["notes"])
    assert list(manifest["model_failures"]) == ["3"]
    assert manifest["failure"] is None
    assert manifest["artifacts"] == sorted(
        list(pipeline.ARTIFACT_FILES) + ["model_1.json", "model_2.json", "model_3.json", "report.txt"]
    )

    failed = json.loads((out / "model_3.json").read_text("utf-8"))
    assert failed["error"].startswith("quasi-separation")
    report = (out / "report.txt").read_text("utf-8")
    assert "Note: model_3 has no finite fit" in report
    assert "Note: " + OUTCOME_COUPLING_NOTE in report


def test_manifest_carries_no_wall_clock_fields(small_corpus_dir, tmp_path):
    out = tmp_path / "out"
    result = pipeline.run_pipeline(_config(small_corpus_dir, out))
    flat_keys = set()

    def walk(node):
        if isinstance(node, dict):
            for key, value in node.items():
                flat_keys.add(key)
                walk(value)
        elif isinstance(node, list):
            for value in node:
                walk(value)

    walk(result.manifest)
    assert not flat_keys & {"timestamp", "generated_at", "created_at", "duration", "elapsed"}


def test_repeated_runs_are_byte_identical(small_corpus_dir, tmp_path):
    out = tmp_path / "out"
    pipeline.run_pipeline(_config(small_corpus_dir, out))
    first = _checksums(out)
    pipeline.run_pipeline(_config(small_corpus_dir, out))
    second = _checksums(out)
    assert first == second


def test_contributor_unit_collapses_rows(small_corpus_dir, tmp_path):
    result = pipeline.run_pipeline(
        _config(small_corpus_dir, tmp_path / "out", unit="contributor")
    )
    labeled_binary = sum(
        1 for label in result.labeling.labels.values()
        if label.sustainedp_or_not_12 is not None
    )
    assert result.fits[1].n_observations == labeled_binary == 44


def test_per_repository_scope_reaches_manifest(small_corpus_dir, tmp_path):
    result = pipeline.run_pipeline(
        _config(small_corpus_dir, tmp_path / "out", threshold_scope="per_repository")
    )
    assert result.manifest["thresholds"]["scope"] == "per_repository"
    assert sorted(result.manifest["thresholds"]["per_repository"]) == [
        "acme/alpha", "acme/beta", "acme/gamma",
    ]
    assert result.manifest["thresholds"]["global"] is None


def test_restricting_models_limits_artifacts(small_corpus_dir, tmp_path):
    out = tmp_path / "out"
    result = pipeline.run_pipeline(_config(small_corpus_dir, out, models=(1,)))
    assert sorted(result.fits) == [1]
    assert result.model_failures == {}
    assert (out / "model_1.json").is_file()
    assert not (out / "model_2.json").exists()
    assert not (out / "model_3.json").exists()


def test_all_models_failing_is_a_stage_error(corpus12_dir, tmp_path):
    out = tmp_path / "out"
    config = _config(
        corpus12_dir, out, labeling=LabelingConfig(data_end=CORPUS12_DATA_END)
    )
    with pytest.raises(pipeline.StageError, match="no requested model has a finite fit"):
        pipeline.run_pipeline(config)

    # every stage artifact before the failure is still on disk
    for name in pipeline.ARTIFACT_FILES:
        assert (out / name).is_file(), name
    manifest = json.loads((out / "manifest.json").read_text("utf-8"))
    assert manifest["failure"] == {
        "stage": "fit",
        "detail": "no requested model has a finite fit",
    }
    assert set(manifest["model_failures"]) == {"1", "2", "3"}
    for index in (1, 2, 3):
        payload = json.loads((out / f"model_{index}.json").read_text("utf-8"))
        assert "error" in payload
    report = (out / "report.txt").read_text("utf-8")
    assert "Sustained participation models" not in report
    assert report.count("has no finite fit") == 3
