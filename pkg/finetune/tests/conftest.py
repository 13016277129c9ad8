"""Fixtures built strictly through the primary package's external interfaces:
the `meibokit` CLI and its JSONL/CSV file contracts. Nothing here imports
meibokit."""

import csv
import subprocess
import sys
from pathlib import Path

import pytest

HEADER = [
    "subject_eye_id", "gender", "age", "race", "tmh_mm", "nikbut_s", "ftbut_s",
    "schirmer_mm", "osdi", "bulbar_hyperemia", "mg_expression_quality",
    "mg_expression_quantity", "dry_eye", "mgd", "blepharitis",
]


def write_fixture_table(path: Path, n: int = 36) -> Path:
    rows = []
    for i in range(1, n + 1):
        sick = i % 3 != 0
        rows.append({
            "subject_eye_id": f"{i}_1_{'R' if i % 2 else 'L'}",
            "gender": "Male" if i % 2 else "Female",
            "age": 25 + (i * 7) % 50,
            "race": ["Asian", "White", "Black", "Hispanic"][i % 4],
            "tmh_mm": round(0.15 + (i % 10) * 0.03, 2),
            "nikbut_s": round(4.0 + (i % 12) * 1.1, 2),
            "ftbut_s": round(3.0 + (i % 9) * 1.3, 2),
            "schirmer_mm": 3 + (i % 15),
            "osdi": round((i * 11) % 80 + 1.5, 2),
            "bulbar_hyperemia": round((i % 5) * 0.6, 1),
            "mg_expression_quality": i % 4,
            "mg_expression_quantity": (i + 1) % 4,
            "dry_eye": "Yes" if sick else "No",
            "mgd": "Yes" if i % 2 else "No",
            "blepharitis": "Yes" if i % 5 == 0 else "No",
        })
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HEADER)
        writer.writeheader()
        writer.writerows(rows)
    return path


def run_meibokit(*args) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "meibokit.cli", *args],
        capture_output=True, text=True,
    )


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    """train.jsonl (32 pairs) + test.jsonl (4) emitted by the primary CLI."""
    root = tmp_path_factory.mktemp("dataset")
    table = write_fixture_table(root / "clinical.csv")
    out = root / "ds"
    proc = run_meibokit(
        "assemble", "--table", str(table), "--out", str(out),
        "--ratio", "0.9", "--seed", "1", "--grouping", "by_record", "--offline",
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "train.jsonl").exists()
    (root / "truth.csv").write_bytes(table.read_bytes())
    return root


@pytest.fixture(scope="session")
def adapter_dir(tmp_path_factory, dataset_dir) -> Path:
    """A 20-step smoke-trained adapter over the 32-pair fixture."""
    from meibotune.config import TrainConfig
    from meibotune.train import train

    out = tmp_path_factory.mktemp("adapter")
    cfg = TrainConfig(output_dir=str(out / "run"), max_seq_len=256, seed=3)
    return train(cfg, dataset_dir / "ds" / "train.jsonl", steps=20)
