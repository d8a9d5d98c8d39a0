"""Tests for cli module."""

import csv
import io
import json

import numpy as np
import pytest

from spacerank.bench import branin, branin_space
from spacerank.cli import COMMANDS, create_parser, main
from spacerank.core import Dataset, uniform_sample
from spacerank.file_utils import read_manifest, save_observations, save_space
from spacerank.scoring import SCORE_COLUMNS

FAST = ["--nx", "20", "--ny", "20"]


@pytest.fixture
def inputs(tmp_path):
    """A Branin space file and 12 seed evaluations."""
    space = branin_space()
    x = uniform_sample(space, 12, seed=0)
    space_path = tmp_path / "branin.json"
    data_path = tmp_path / "seeds.csv"
    save_space(str(space_path), space)
    save_observations(str(data_path), Dataset.from_arrays(space, x, branin(x)))
    return str(space_path), str(data_path)


def read_rows(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


class TestParser:
    """Tests for argument parsing."""

    def test_command_required(self):
        """Test a subcommand must be given."""
        with pytest.raises(SystemExit):
            create_parser().parse_args([])

    def test_prune_sources_exclusive(self):
        """Test --objective and --table cannot be combined."""
        with pytest.raises(SystemExit):
            create_parser().parse_args(
                [
                    "prune",
                    "--objective",
                    "branin",
                    "--table",
                    "t.csv",
                    "--space",
                    "s.json",
                    "--b1",
                    "5",
                    "--b2",
                    "5",
                ]
            )

    def test_defaults(self):
        """Test score defaults."""
        args = create_parser().parse_args(
            ["score", "--space", "s.json", "--data", "d.csv", "--budget", "3"]
        )
        assert args.variant == "mean-bEI"
        assert args.nx == 1000
        assert args.seed == 0


class TestScoreCommand:
    """Tests for the score command."""

    def test_score_prints_csv(self, inputs, capsys):
        """Test a single CSV row with a manifest comment."""
        space, data = inputs
        code = main(["score", "--space", space, "--data", data, "--budget", "5"] + FAST)
        assert code == 0
        out = capsys.readouterr().out
        rows = read_rows(out)
        assert list(rows[0]) == SCORE_COLUMNS
        assert rows[0]["space_id"] == "branin"
        assert float(rows[0]["value"]) >= 0.0
        assert "# manifest: " in out

    def test_score_deterministic(self, inputs, capsys):
        """Test repeated runs print identical bytes."""
        space, data = inputs
        argv = ["score", "--space", space, "--data", data, "--budget", "5"] + FAST
        main(argv)
        first = capsys.readouterr().out
        main(argv)
        assert capsys.readouterr().out == first

    def test_score_independent_of_threads(self, inputs, capsys):
        """Test the thread count never changes the output."""
        space, data = inputs
        argv = ["score", "--space", space, "--data", data, "--budget", "5"]
        argv += ["--nx", "120", "--ny", "10"]
        main(["--threads", "1"] + argv)
        serial = capsys.readouterr().out
        main(["--threads", "4"] + argv)
        assert capsys.readouterr().out == serial

    def test_probability_variant(self, inputs, capsys):
        """Test b-PI scores lie in [0, 1]."""
        space, data = inputs
        argv = ["score", "--space", space, "--data", data, "--budget", "10"]
        code = main(argv + FAST + ["--variant", "mean-bPI"])
        assert code == 0
        value = float(read_rows(capsys.readouterr().out)[0]["value"])
        assert 0.0 <= value <= 1.0

    def test_missing_column(self, inputs, tmp_path, capsys):
        """Test a data file without a dimension column exits with 2."""
        space, _ = inputs
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,objective\n0.5,1.0\n")
        code = main(["score", "--space", space, "--data", str(bad), "--budget", "1"])
        assert code == 2
        assert "Missing column 'x2'" in capsys.readouterr().err

    def test_missing_file(self, inputs, tmp_path):
        """Test a missing data file exits with 2."""
        space, _ = inputs
        missing = str(tmp_path / "missing.csv")
        argv = ["score", "--space", space, "--data", missing, "--budget", "1"]
        assert main(argv) == 2

    def test_single_observation(self, inputs, tmp_path):
        """Test one observation is too few to fit and exits with 2."""
        space, _ = inputs
        one = tmp_path / "one.csv"
        one.write_text("x1,x2,objective\n0.5,1.0,3.0\n")
        argv = ["score", "--space", space, "--data", str(one), "--budget", "1"]
        assert main(argv) == 2


class TestRankCommand:
    """Tests for the rank command."""

    def test_duplicate_spaces_tie(self, inputs, capsys):
        """Test the same file twice gets distinct ids and equal scores."""
        space, data = inputs
        argv = ["rank", "--spaces", space, space, "--data", data, "--budgets", "1,5"]
        assert main(argv + FAST) == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 4
        assert {row["space_id"] for row in rows} == {"branin@0", "branin@1"}
        first_budget = [row for row in rows if row["budget"] == "1"]
        assert first_budget[0]["value"] == first_budget[1]["value"]
        assert [row["rank"] for row in first_budget] == ["1", "2"]

    def test_bad_budgets(self, inputs, capsys):
        """Test a malformed budget list exits with 2."""
        space, data = inputs
        argv = ["rank", "--spaces", space, "--data", data, "--budgets", "0,5"]
        assert main(argv) == 2


class TestPruneCommand:
    """Tests for the prune command."""

    def test_prune_writes_outputs(self, inputs, tmp_path, capsys):
        """Test result files and the printed JSON."""
        space, _ = inputs
        out_dir = tmp_path / "out"
        argv = ["prune", "--objective", "branin", "--space", space]
        argv += ["--b1", "8", "--b2", "4", "--rates", "1.0", "--per-rate", "1"]
        argv += ["--output-dir", str(out_dir)] + FAST
        assert main(argv) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["n_candidates"] == 2
        assert len(doc["best_curve"]) == 12
        for name in (
            "prune_result.json",
            "prune_curve.csv",
            "chosen_space.json",
            "evaluations.csv",
            "manifest.json",
        ):
            assert (out_dir / name).exists()
        assert read_manifest(str(out_dir / "manifest.json"))["command"] == "prune"

    def test_b1_too_small(self, inputs, tmp_path):
        """Test b1 = 1 exits with 2."""
        space, _ = inputs
        argv = ["prune", "--objective", "branin", "--space", space]
        argv += ["--b1", "1", "--b2", "4", "--output-dir", str(tmp_path)]
        assert main(argv) == 2

    def test_table_source(self, inputs, tmp_path, capsys):
        """Test pruning over a table of pre-collected evaluations."""
        space, data = inputs
        argv = ["prune", "--table", data, "--space", space]
        argv += ["--b1", "6", "--b2", "2", "--rates", "1.0", "--per-rate", "1"]
        argv += ["--output-dir", str(tmp_path / "table")] + FAST
        assert main(argv) == 0
        assert json.loads(capsys.readouterr().out)["n_candidates"] == 2


class TestTuneOrFixCommand:
    """Tests for the tune-or-fix command."""

    def test_without_fixes_recommends_tune(self, inputs, tmp_path, capsys):
        """Test tuning is recommended when nothing is fixed."""
        space, data = inputs
        argv = ["tune-or-fix", "--space", space, "--data", data, "--dim", "x1"]
        argv += ["--budgets", "5", "--output-dir", str(tmp_path)] + FAST
        assert main(argv) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["results"][0]["recommendation"] == "tune"
        assert (tmp_path / "tune_or_fix.csv").exists()

    def test_fix_outside_range(self, inputs, tmp_path):
        """Test a fixed value outside the dimension exits with 2."""
        space, data = inputs
        argv = ["tune-or-fix", "--space", space, "--data", data, "--dim", "x1"]
        argv += ["--fix", "50", "--budgets", "5", "--output-dir", str(tmp_path)]
        assert main(argv + FAST) == 2

    def test_unknown_dimension(self, inputs, tmp_path):
        """Test an unknown dimension exits with 2."""
        space, data = inputs
        argv = ["tune-or-fix", "--space", space, "--data", data, "--dim", "eta"]
        argv += ["--budgets", "5", "--output-dir", str(tmp_path)]
        assert main(argv + FAST) == 2


class TestReproduceCommand:
    """Tests for the reproduce command."""

    def test_unknown_experiment(self, tmp_path, capsys):
        """Test an unknown experiment exits with 2 and lists the known ones."""
        argv = ["reproduce", "--experiment", "nope", "--output-dir", str(tmp_path)]
        assert main(argv) == 2
        assert "branin-ranking" in capsys.readouterr().err


class TestArtifacts:
    """Tests for manifests on written artifacts."""

    def test_every_prune_csv_carries_manifest(self, inputs, tmp_path, capsys):
        """Test each CSV written by prune ends with the run manifest."""
        space, _ = inputs
        out_dir = tmp_path / "out"
        argv = ["prune", "--objective", "branin", "--space", space, "--seed", "5"]
        argv += ["--b1", "6", "--b2", "3", "--rates", "1.0", "--per-rate", "1"]
        argv += ["--output-dir", str(out_dir)] + FAST
        assert main(argv) == 0
        csv_paths = sorted(out_dir.glob("*.csv"))
        assert {p.name for p in csv_paths} == {"evaluations.csv", "prune_curve.csv"}
        for path in csv_paths:
            manifest = read_manifest(str(path))
            assert manifest["command"] == "prune"
            assert manifest["seed"] == 5
            assert manifest["tool_version"]

    def test_replacing_different_run_warns(self, inputs, tmp_path, caplog):
        """Test writing over another run's artifacts logs a warning."""
        space, data = inputs
        argv = ["tune-or-fix", "--space", space, "--data", data, "--dim", "x1"]
        argv += ["--budgets", "3", "--output-dir", str(tmp_path)] + FAST
        assert main(argv) == 0
        assert main(argv) == 0
        assert "Replacing artifacts" not in caplog.text
        assert main(argv + ["--seed", "9"]) == 0
        assert "Replacing artifacts of a different 'tune-or-fix' run" in caplog.text


class TestExitCodes:
    """Tests for the exit-code ladder in main."""

    def test_interrupted(self, monkeypatch, capsys):
        """Test an interrupted command exits with the failure code."""

        def interrupted(args):
            raise KeyboardInterrupt

        monkeypatch.setitem(COMMANDS, "score", interrupted)
        argv = ["score", "--space", "s.json", "--data", "d.csv", "--budget", "1"]
        assert main(argv) == 3
        assert "Interrupted" in capsys.readouterr().err

    def test_numerical_failure(self, monkeypatch):
        """Test numerical errors exit with 3."""

        def singular(args):
            raise np.linalg.LinAlgError("not positive definite")

        monkeypatch.setitem(COMMANDS, "score", singular)
        argv = ["score", "--space", "s.json", "--data", "d.csv", "--budget", "1"]
        assert main(argv) == 3
