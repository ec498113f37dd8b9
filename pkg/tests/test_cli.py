"""Tests for the command line."""
from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

from misplaced_repair.cli import main
from misplaced_repair.const import (
    CORRUPTED_FILE,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    REPAIRED_FILE,
    REPORT_FILE,
    RESULTS_FILE,
    REVIEW_FILE,
    SCORES_CSV_FILE,
    SCORES_FILE,
    TRUTH_FILE,
)
from misplaced_repair.core import RotationPattern, TimeInterval, apply_rotation


@pytest.fixture
def clean_csv(make_series, write_csv) -> Path:
    """Return a clean CSV file of well-separated dimensions."""
    return write_csv(make_series(length=6000, dims=5, seed=31), "clean.csv")


def run_inject(clean_csv: Path, output: Path, *extra: str) -> int:
    """Run the inject command with a small instance count."""
    return main(
        ["inject", str(clean_csv), "--output-dir", str(output), "--instance_count", "4", *extra]
    )


def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    """Test the version option exits cleanly."""
    assert main(["--version"]) == EXIT_OK
    assert "1.0.0" in capsys.readouterr().out


def test_repair_clean_file(clean_csv: Path, tmp_path: Path) -> None:
    """Test a clean file is written back unchanged with an empty report."""
    output = tmp_path / "out"
    assert main(["repair", str(clean_csv), "--output-dir", str(output)]) == EXIT_OK
    assert (output / REPAIRED_FILE).read_bytes() == clean_csv.read_bytes()
    report = json.loads((output / REPORT_FILE).read_text(encoding="utf-8"))
    assert report["instances"] == []
    assert report["length"] == 6000
    assert report["config"]["variant"] == "ISR"
    assert (output / REVIEW_FILE).read_text(encoding="utf-8") == ""


def test_inject_repair_evaluate(clean_csv: Path, tmp_path: Path, capsys) -> None:
    """Test the full cycle from injection to scores."""
    injected = tmp_path / "injected"
    repaired = tmp_path / "repaired"
    scored = tmp_path / "scored"
    assert run_inject(clean_csv, injected, "--seed", "3") == EXIT_OK
    assert (
        main(
            [
                "verify",
                str(injected / CORRUPTED_FILE),
                str(injected / TRUTH_FILE),
                str(clean_csv),
            ]
        )
        == EXIT_OK
    )
    assert main(["repair", str(injected / CORRUPTED_FILE), "--output-dir", str(repaired)]) == EXIT_OK
    assert (repaired / REPAIRED_FILE).read_bytes() == clean_csv.read_bytes()

    capsys.readouterr()
    assert (
        main(
            [
                "evaluate",
                str(repaired / REPORT_FILE),
                str(injected / TRUTH_FILE),
                "--output-dir",
                str(scored),
            ]
        )
        == EXIT_OK
    )
    assert "p_d" in capsys.readouterr().out
    scores = json.loads((scored / SCORES_FILE).read_text(encoding="utf-8"))
    assert scores["true_intervals"] == 4
    assert min(scores["p_d"], scores["r_d"], scores["p_r"], scores["r_r"]) >= 0.95
    assert len(pd.read_csv(scored / SCORES_CSV_FILE)) == 1


def test_repair_own_output_is_empty(clean_csv: Path, tmp_path: Path) -> None:
    """Test repairing a repaired file reports nothing."""
    injected = tmp_path / "injected"
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert run_inject(clean_csv, injected, "--seed", "5") == EXIT_OK
    assert main(["repair", str(injected / CORRUPTED_FILE), "--output-dir", str(first)]) == EXIT_OK
    assert main(["repair", str(first / REPAIRED_FILE), "--output-dir", str(second)]) == EXIT_OK
    report = json.loads((second / REPORT_FILE).read_text(encoding="utf-8"))
    assert report["instances"] == []


def test_inject_is_deterministic(clean_csv: Path, tmp_path: Path) -> None:
    """Test the same seed writes identical files."""
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert run_inject(clean_csv, first, "--seed", "8") == EXIT_OK
    assert run_inject(clean_csv, second, "--seed", "8") == EXIT_OK
    for name in (CORRUPTED_FILE, TRUTH_FILE):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_inject_nothing(clean_csv: Path, tmp_path: Path) -> None:
    """Test zero instances write the input unchanged."""
    output = tmp_path / "out"
    assert (
        main(["inject", str(clean_csv), "--output-dir", str(output), "--instance_count", "0"])
        == EXIT_OK
    )
    assert (output / CORRUPTED_FILE).read_bytes() == clean_csv.read_bytes()


def test_verify_detects_wrong_truth(clean_csv: Path, tmp_path: Path) -> None:
    """Test verification fails with the ground truth of another seed."""
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert run_inject(clean_csv, first, "--seed", "1") == EXIT_OK
    assert run_inject(clean_csv, second, "--seed", "2") == EXIT_OK
    code = main(["verify", str(first / CORRUPTED_FILE), str(second / TRUTH_FILE), str(clean_csv)])
    assert code == EXIT_DATA


def test_evaluate_axis_mismatch(make_series, write_csv, clean_csv: Path, tmp_path: Path, capsys) -> None:
    """Test a report and truth over different axes are rejected."""
    short_csv = write_csv(make_series(length=300, dims=5), "short.csv")
    repaired = tmp_path / "repaired"
    injected = tmp_path / "injected"
    assert main(["repair", str(short_csv), "--output-dir", str(repaired)]) == EXIT_OK
    assert run_inject(clean_csv, injected) == EXIT_OK
    capsys.readouterr()
    code = main(["evaluate", str(repaired / REPORT_FILE), str(injected / TRUTH_FILE)])
    assert code == EXIT_DATA
    assert "different time axes" in capsys.readouterr().err


def test_repair_single_row(tmp_path: Path) -> None:
    """Test a file shorter than the window is a structural error."""
    path = tmp_path / "one.csv"
    path.write_text("timestamp,a,b\n1,1.0,2.0\n", encoding="utf-8")
    assert main(["repair", str(path), "--output-dir", str(tmp_path / "out")]) == EXIT_DATA


def test_repair_malformed_file(tmp_path: Path, capsys) -> None:
    """Test a malformed row is a data error naming its line."""
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,a,b\n1,1.0,2.0\n2,x,2.0\n", encoding="utf-8")
    assert main(["repair", str(path), "--output-dir", str(tmp_path / "out")]) == EXIT_DATA
    assert "line 3" in capsys.readouterr().err


def test_invalid_flag_value(clean_csv: Path, tmp_path: Path) -> None:
    """Test an out-of-range flag is a usage error."""
    code = main(["repair", str(clean_csv), "--output-dir", str(tmp_path), "--window_len", "1"])
    assert code == EXIT_USAGE


def test_unknown_config_key(clean_csv: Path, tmp_path: Path, capsys) -> None:
    """Test an unknown key in the config file is a usage error."""
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"window_length": 40}), encoding="utf-8")
    code = main(["repair", str(clean_csv), "--output-dir", str(tmp_path), "--config", str(config)])
    assert code == EXIT_USAGE
    assert "window_length" in capsys.readouterr().err


def test_flag_overrides_config_file(clean_csv: Path, tmp_path: Path) -> None:
    """Test a flag wins over the config file."""
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"len1": 30, "variant": "CRS"}), encoding="utf-8")
    output = tmp_path / "out"
    code = main(
        [
            "repair",
            str(clean_csv),
            "--output-dir",
            str(output),
            "--config",
            str(config),
            "--variant",
            "G-ISR",
            "--no-protect_long_blocks",
        ]
    )
    assert code == EXIT_OK
    echo = json.loads((output / REPORT_FILE).read_text(encoding="utf-8"))["config"]
    assert echo["variant"] == "G-ISR"
    assert echo["len1"] == 30
    assert echo["protect_long_blocks"] is False


def test_unknown_command_is_usage_error() -> None:
    """Test click usage errors map to exit code 1."""
    assert main(["rebuild"]) == EXIT_USAGE


def test_sweep_single_cell(clean_csv: Path, tmp_path: Path) -> None:
    """Test a one-cell grid writes one row."""
    output = tmp_path / "out"
    code = main(
        [
            "sweep",
            str(clean_csv),
            "--output-dir",
            str(output),
            "--lengths",
            "3000",
            "--attrs",
            "2",
            "--variants",
            "ISR",
            "--instance_count",
            "2",
        ]
    )
    assert code == EXIT_OK
    rows = pd.read_csv(output / RESULTS_FILE)
    assert len(rows) == 1
    assert rows.loc[0, "variant"] == "ISR"
    assert rows.loc[0, "length"] == 3000


def test_sweep_rejects_unknown_variant(clean_csv: Path, tmp_path: Path) -> None:
    """Test unknown variant names are usage errors."""
    code = main(["sweep", str(clean_csv), "--output-dir", str(tmp_path), "--variants", "ISR,Magic"])
    assert code == EXIT_USAGE


@pytest.fixture
def swapped_csv(make_series, write_csv) -> tuple[Path, Path]:
    """Return a clean CSV and a copy with dimensions 0 and 1 swapped on its first 100 rows."""
    clean = make_series(length=400, dims=5, seed=32)
    swapped = apply_rotation(clean, RotationPattern((0, 1)), TimeInterval(0, 99))
    return write_csv(clean, "clean_head.csv"), write_csv(swapped, "swapped_head.csv")


def test_repair_with_history(clean_csv: Path, swapped_csv, tmp_path: Path) -> None:
    """Test models fitted on a history file let the first rows be scanned and repaired."""
    clean_head, swapped_head = swapped_csv
    output = tmp_path / "out"
    code = main(
        ["repair", str(swapped_head), "--output-dir", str(output), "--history", str(clean_csv)]
    )
    assert code == EXIT_OK
    report = json.loads((output / REPORT_FILE).read_text(encoding="utf-8"))
    assert [instance["index"] for instance in report["instances"]] == [[0, 99]]
    assert report["instances"][0]["rotations"] == [[0, 1]]
    assert (output / REPAIRED_FILE).read_bytes() == clean_head.read_bytes()


def test_repair_models_out_and_in(clean_csv: Path, swapped_csv, tmp_path: Path) -> None:
    """Test written model snapshots seed the scan of a later file."""
    _clean_head, swapped_head = swapped_csv
    snapshots = tmp_path / "models.json"
    code = main(
        ["repair", str(clean_csv), "--output-dir", str(tmp_path / "first"), "--models-out", str(snapshots)]
    )
    assert code == EXIT_OK
    models = json.loads(snapshots.read_text(encoding="utf-8"))
    assert [model["dim"] for model in models] == [0, 1, 2, 3, 4]
    assert all(len(model["window"]) == 50 for model in models)

    output = tmp_path / "second"
    code = main(
        ["repair", str(swapped_head), "--output-dir", str(output), "--models-in", str(snapshots)]
    )
    assert code == EXIT_OK
    report = json.loads((output / REPORT_FILE).read_text(encoding="utf-8"))
    assert [instance["index"] for instance in report["instances"]] == [[0, 99]]


def test_repair_models_in_wrong_dimensions(
    make_series, write_csv, clean_csv: Path, tmp_path: Path
) -> None:
    """Test snapshots for another dimension count are a structural error."""
    snapshots = tmp_path / "models.json"
    code = main(
        ["repair", str(clean_csv), "--output-dir", str(tmp_path / "first"), "--models-out", str(snapshots)]
    )
    assert code == EXIT_OK
    narrow = write_csv(make_series(length=200, dims=3), "narrow.csv")
    code = main(
        ["repair", str(narrow), "--output-dir", str(tmp_path / "second"), "--models-in", str(snapshots)]
    )
    assert code == EXIT_DATA


def test_sweep_block_lambdas(clean_csv: Path, tmp_path: Path) -> None:
    """Test each lambda adds a Block row and other variants run once."""
    output = tmp_path / "out"
    code = main(
        [
            "sweep",
            str(clean_csv),
            "--output-dir",
            str(output),
            "--lengths",
            "3000",
            "--attrs",
            "2",
            "--variants",
            "ISR,Block",
            "--lambdas",
            "1,2",
            "--instance_count",
            "2",
        ]
    )
    assert code == EXIT_OK
    rows = pd.read_csv(output / RESULTS_FILE)
    assert len(rows) == 3
    assert (rows["variant"] == "ISR").sum() == 1
    block = rows[rows["variant"] == "Block"]
    assert sorted(block["block_lambda"]) == [1.0, 2.0]


def test_sweep_rejects_lambda_out_of_range(clean_csv: Path, tmp_path: Path) -> None:
    """Test a lambda outside its range is a usage error."""
    code = main(
        ["sweep", str(clean_csv), "--output-dir", str(tmp_path), "--variants", "Block", "--lambdas", "0.5"]
    )
    assert code == EXIT_USAGE


def test_evaluate_reads_config_file(clean_csv: Path, tmp_path: Path) -> None:
    """Test the Jaccard minimum of a config file applies to evaluate."""
    injected = tmp_path / "injected"
    assert run_inject(clean_csv, injected, "--seed", "6") == EXIT_OK
    document = json.loads((injected / TRUTH_FILE).read_text(encoding="utf-8"))
    document["instances"][0]["index"][0] += 1
    report_path = tmp_path / "report.json"
    report_path.write_text(json.dumps(document), encoding="utf-8")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"jaccard_min": 1.0}), encoding="utf-8")

    loose = tmp_path / "loose"
    strict = tmp_path / "strict"
    truth = str(injected / TRUTH_FILE)
    assert main(["evaluate", str(report_path), truth, "--output-dir", str(loose)]) == EXIT_OK
    code = main(
        ["evaluate", str(report_path), truth, "--output-dir", str(strict), "--config", str(config)]
    )
    assert code == EXIT_OK
    assert json.loads((loose / SCORES_FILE).read_text(encoding="utf-8"))["correct_detections"] == 4
    assert json.loads((strict / SCORES_FILE).read_text(encoding="utf-8"))["correct_detections"] == 3


def test_evaluate_unknown_config_key(clean_csv: Path, tmp_path: Path) -> None:
    """Test evaluate validates its config file."""
    injected = tmp_path / "injected"
    assert run_inject(clean_csv, injected) == EXIT_OK
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"jacard_min": 0.9}), encoding="utf-8")
    truth = str(injected / TRUTH_FILE)
    code = main(["evaluate", truth, truth, "--output-dir", str(tmp_path / "out"), "--config", str(config)])
    assert code == EXIT_USAGE
