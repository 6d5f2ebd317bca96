import io
import json
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

import main
from models.report import CSV_COLUMNS
from services.verification import CheckResult

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

BASE_ARGS = [
    "--algo", "dada",
    "--adversary", '{"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5}',
    "--delays", '{"kind": "constant", "d": 3}',
    "--K", "3",
    "--T", "60",
]


@pytest.fixture
def runner():
    return CliRunner()


class TestRun:
    def test_csv_to_stdout(self, runner):
        result = runner.invoke(main.cli, ["run", *BASE_ARGS, "--seeds", "3"])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(io.StringIO(result.stdout))
        assert list(frame.columns) == CSV_COLUMNS
        assert frame["seed"].tolist() == [0, 1, 2]
        assert frame["bound_cor1"].notna().all()
        assert frame["bound_thm4_worst"].isna().all()

    def test_files(self, runner, tmp_path):
        csv, out = tmp_path / "runs.csv", tmp_path / "runs.json"
        args = ["run", *BASE_ARGS, "--seeds", "2", "--seed_base", "10", "--csv", str(csv), "--json", str(out),
                "--checkpoints", "30,60"]
        result = runner.invoke(main.cli, args)
        assert result.exit_code == 0, result.output
        assert pd.read_csv(csv)["seed"].tolist() == [10, 11]
        payload = json.loads(out.read_text())
        assert [r["seed"] for r in payload["reports"]] == [10, 11]
        assert all(len(r["digest"]) == 64 for r in payload["reports"])
        assert payload["summary"]["n"] == 2
        assert set(payload["reports"][0]["checkpoint_regret"]) == {"30", "60"}

    def test_config_file_with_override(self, runner, tmp_path):
        csv = tmp_path / "small.csv"
        args = ["run", "--config", str(CONFIG_DIR / "deda_oracle_small.json"), "--seeds", "1", "--T", "40",
                "--csv", str(csv)]
        result = runner.invoke(main.cli, args)
        assert result.exit_code == 0, result.output
        row = pd.read_csv(csv).iloc[0]
        assert row["algo"] == "deda-bound" and row["T"] == 40

    @pytest.mark.parametrize(
        "extra",
        [["--K", "1"], ["--adversary", "{not json"], ["--seed_base", "3"], ["--checkpoints", "0"]],
    )
    def test_invalid_config(self, runner, extra):
        result = runner.invoke(main.cli, ["run", *BASE_ARGS, *extra])
        assert result.exit_code == 1

    def test_bad_config_file(self, runner, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("[1, 2]")
        result = runner.invoke(main.cli, ["run", "--config", str(path)])
        assert result.exit_code == 1


class TestSweep:
    def test_grid(self, runner, tmp_path):
        csv = tmp_path / "sweep.csv"
        args = ["sweep", *BASE_ARGS, "--seeds", "2", "--csv", str(csv),
                "--grid", "delays.d=0,4", "--grid", "algo=dada,dada-hp"]
        result = runner.invoke(main.cli, args)
        assert result.exit_code == 0, result.output
        assert str(csv) in result.stdout
        frame = pd.read_csv(csv)
        assert len(frame) == 8
        assert sorted(set(frame["algo"])) == ["dada", "dada-hp"]
        assert sorted(set(frame["D"])) == [0, frame["D"].max()]

    def test_malformed_grid(self, runner, tmp_path):
        result = runner.invoke(main.cli, ["sweep", *BASE_ARGS, "--grid", "algo"])
        assert result.exit_code == 1


class TestVerify:
    def test_passes(self, runner):
        result = runner.invoke(main.cli, ["verify", "--instances", "3", "--seed", "1"])
        assert result.exit_code == 0, result.output
        assert "FAIL" not in result.stdout
        assert "PASS  deda" in result.stdout

    def test_with_config(self, runner):
        args = ["verify", "--instances", "2", "--config", str(CONFIG_DIR / "deda_oracle_small.json")]
        result = runner.invoke(main.cli, args)
        assert result.exit_code == 0, result.output
        assert "deda-oracle[seed=4]" in result.stdout

    def test_failure_exit_code(self, runner, monkeypatch):
        monkeypatch.setattr(
            main, "run_verification",
            lambda instances, seed: [CheckResult(name="weights", passed=False, detail="broken")],
        )
        result = runner.invoke(main.cli, ["verify", "--instances", "1"])
        assert result.exit_code == 2
        assert "FAIL  weights" in result.stdout
