import json

from pathlib import Path

import pytest

from tests.parameters.common import ONE_TRUCK, TWO_TRUCKS

from chained_tube_mpc.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_SYNTHESIS, EXIT_USAGE, main
from chained_tube_mpc.storage_adapters.csv_adapter import CSVLogAdapter


def write_config(directory: Path, **changes) -> Path:
    """Write a single-truck run config into ``directory``.

    :param directory: target directory
    :param changes: run config entries to replace
    """
    data = {"model": ONE_TRUCK, "x0": [0.2, 0.0], "horizon": 5, "steps": 5, "out": str(directory / "run")}
    data.update(changes)
    path = directory / "run.json"
    path.write_text(json.dumps(data))
    return path


class TestCommands:
    """Tests for the subcommands on a single truck."""

    def test_synth(self, out_dir):
        """Test the design is cached and its check report written."""
        assert main(["synth", "--config", str(write_config(out_dir))]) == EXIT_OK
        report = (out_dir / "run" / "synthesis_report.txt").read_text()
        assert report.startswith("PASS  ")
        assert "FAIL" not in report
        assert len(list((out_dir / "run" / "cache").glob("*.hdf5"))) == 1

    def test_simulate(self, out_dir):
        """Test the log is written as CSV and HDF5."""
        config = write_config(out_dir)
        assert main(["simulate", "--config", str(config)]) == EXIT_OK
        header, data = CSVLogAdapter(out_dir / "run").read(out_dir / "run" / "chain.csv")
        assert header[0] == "t"
        assert data.shape == (5, 6)
        assert (out_dir / "run" / "chain.hdf5").is_file()

    def test_simulate_reuses_cache(self, out_dir):
        """Test a second run finds the cached design."""
        config = write_config(out_dir)
        assert main(["synth", "--config", str(config)]) == EXIT_OK
        cached = list((out_dir / "run" / "cache").glob("*.hdf5"))
        assert main(["simulate", "--config", str(config), "--controller", "dempc"]) == EXIT_OK
        assert list((out_dir / "run" / "cache").glob("*.hdf5")) == cached
        assert (out_dir / "run" / "dempc.csv").is_file()

    def test_flags_override_file(self, out_dir):
        """Test command line flags win over the config file."""
        config = write_config(out_dir)
        out = out_dir / "other"
        assert main(["simulate", "--config", str(config), "--steps", "3", "--out", str(out)]) == EXIT_OK
        _, data = CSVLogAdapter(out).read(out / "chain.csv")
        assert data.shape[0] == 3

    def test_compare(self, out_dir):
        """Test every controller runs and the report is written."""
        assert main(["compare", "--config", str(write_config(out_dir))]) == EXIT_OK
        run_dir = out_dir / "run"
        text = (run_dir / "report.md").read_text()
        assert text.startswith("# Cost comparison")
        assert "| Controller | Global plant | Truck i=1 |" in text
        for name in ("chain", "cmpc", "tmpc", "dempc"):
            assert (run_dir / f"{name}.csv").is_file()

    def test_infeasible_start(self, out_dir):
        """Test a state outside the constraints stops the run."""
        config = write_config(out_dir, x0=[5.0, 0.0])
        assert main(["simulate", "--config", str(config)]) == EXIT_INFEASIBLE
        _, data = CSVLogAdapter(out_dir / "run").read(out_dir / "run" / "chain.csv")
        assert data.shape == (0, 6)

    def test_infeasible_compare(self, out_dir):
        """Test compare reports a stopped chain of tubes."""
        config = write_config(out_dir, x0=[5.0, 0.0])
        assert main(["compare", "--config", str(config)]) == EXIT_INFEASIBLE
        assert "stopped:" in (out_dir / "run" / "report.md").read_text()

    def test_synthesis_failure(self, out_dir):
        """Test a design that cannot be built."""
        config = write_config(out_dir, model=TWO_TRUCKS, x0=[0.0] * 4, synthesis={"rpi_max_iter": 1})
        assert main(["synth", "--config", str(config)]) == EXIT_SYNTHESIS
        assert main(["simulate", "--config", str(config)]) == EXIT_SYNTHESIS


class TestUsageErrors:
    """Tests for exit code 1."""

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["run"],
            ["simulate", "--steps", "many"],
            ["simulate", "--controller", "lqr"],
        ],
    )
    def test_bad_arguments(self, argv):
        """Test argument errors exit with the usage code."""
        with pytest.raises(SystemExit) as e:
            main(argv)
        assert e.value.code == EXIT_USAGE

    def test_invalid_values(self, out_dir):
        """Test values rejected by the config."""
        config = str(write_config(out_dir))
        assert main(["simulate", "--config", config, "--steps", "0"]) == EXIT_USAGE
        assert main(["simulate", "--config", config, "--horizon", "-2"]) == EXIT_USAGE
        assert main(["simulate", "--config", config, "--loglevel", "nope"]) == EXIT_USAGE

    def test_bad_config_file(self, out_dir):
        """Test unreadable and unknown config content."""
        missing = out_dir / "missing.json"
        assert main(["synth", "--config", str(missing)]) == EXIT_USAGE
        assert main(["synth", "--config", str(write_config(out_dir, speed=3))]) == EXIT_USAGE
        assert main(["synth", "--config", str(write_config(out_dir, x0=[0.0]))]) == EXIT_USAGE


if __name__ == "__main__":
    pytest.main()
