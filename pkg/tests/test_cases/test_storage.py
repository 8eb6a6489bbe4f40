import json
import shutil

import h5py
import numpy as np
import pytest

from chained_tube_mpc.errors import FatalInfeasible, StorageError
from chained_tube_mpc.runtime import run
from chained_tube_mpc.storage_adapters.csv_adapter import CSVLogAdapter, csv_header
from chained_tube_mpc.storage_adapters.hdf5 import HDF5CompressionOpts, HDF5Options
from chained_tube_mpc.storage_adapters.hdf5.hdf5_storage_adapter import (
    HDF5DesignCache,
    HDF5SimLogArchive,
    HDF5StringMixin,
)
from chained_tube_mpc.synthesis import MATRIX_FIELDS, SET_FIELDS, validate

from tests.plugins.runtime import HORIZON


class TestDesignCache:
    """Tests for the HDF5 design cache."""

    def test_save_and_load(self, out_dir, weak_chain, weak_design):
        """Test a cached design restores gains, sets and report exactly."""
        cache = HDF5DesignCache(out_dir)
        assert not cache.exists("abc")
        path = cache.save(weak_design, "abc")
        assert path == out_dir / "cache" / "abc.hdf5"
        assert cache.exists("abc")

        loaded = cache.load("abc", weak_chain)
        assert len(loaded) == len(weak_design)
        assert loaded.options == weak_design.options
        assert loaded.report == weak_design.report
        for original, restored in zip(weak_design, loaded):
            assert restored.delta == original.delta
            for name in MATRIX_FIELDS:
                assert np.array_equal(getattr(restored, name), getattr(original, name))
            for name in SET_FIELDS:
                assert np.array_equal(getattr(restored, name).A, getattr(original, name).A)
                assert np.array_equal(getattr(restored, name).b, getattr(original, name).b)
        assert validate(loaded).passed

    def test_isolated_design(self, out_dir, one_truck, one_truck_design):
        """Test an unbounded delta survives the cache."""
        cache = HDF5DesignCache(out_dir)
        cache.save(one_truck_design, "truck")
        loaded = cache.load("truck", one_truck)
        assert loaded[0].delta == np.inf
        assert loaded[0].isolated

    def test_meta(self, out_dir, weak_design, one_truck_config):
        """Test the metadata names hash, options and model."""
        cache = HDF5DesignCache(out_dir)
        cache.save(weak_design, "abc", one_truck_config)
        meta = cache.read_meta("abc")
        assert meta["hash"] == "abc"
        assert meta["subsystems"] == 3
        assert meta["options"] == weak_design.options.as_dict
        assert meta["model"] == one_truck_config.as_dict

    def test_missing(self, out_dir, weak_chain):
        """Test loading an absent hash."""
        with pytest.raises(StorageError):
            HDF5DesignCache(out_dir).load("nothing", weak_chain)

    def test_hash_mismatch(self, out_dir, weak_chain, weak_design):
        """Test a file renamed to another hash is refused."""
        cache = HDF5DesignCache(out_dir)
        shutil.copy(cache.save(weak_design, "abc"), cache.path("def"))
        with pytest.raises(StorageError):
            cache.load("def", weak_chain)

    def test_system_mismatch(self, out_dir, one_truck, weak_design):
        """Test a design cannot be loaded for a system of another size."""
        cache = HDF5DesignCache(out_dir)
        cache.save(weak_design, "abc")
        with pytest.raises(StorageError):
            cache.load("abc", one_truck)


class TestSimLogArchive:
    """Tests for the HDF5 archive of closed-loop logs."""

    @pytest.mark.parametrize(
        "options",
        [None, HDF5Options(chunks=(4,), compression_opts=HDF5CompressionOpts("gzip", 4)), HDF5Options(chunks=True)],
    )
    def test_write_and_read(self, out_dir, chain_log, options):
        """Test every dataset of the archive."""
        archive = HDF5SimLogArchive(out_dir, options)
        path = archive.write(chain_log)
        assert path.name == "chain.hdf5"
        assert archive.read_meta(path) == chain_log.meta
        assert np.array_equal(archive.read_data(path, "states"), chain_log.states)
        assert np.array_equal(archive.read_data(path, "inputs"), chain_log.inputs)
        assert np.array_equal(archive.read_data(path, "statuses"), chain_log.statuses)
        assert np.array_equal(archive.read_data(path, "outer_costs"), chain_log.outer_costs)
        z, s, e = chain_log.tube_errors(1)
        assert np.array_equal(archive.read_data(path, "agent_1/z"), z)
        assert np.array_equal(archive.read_data(path, "agent_1/s"), s)
        assert np.array_equal(archive.read_data(path, "agent_1/e"), e)
        assert np.array_equal(archive.read_data(path, "agent_2/outer_states"), chain_log.outer_states(2))

    def test_baseline_archive(self, out_dir, cmpc_log):
        """Test absent outer trajectories are stored as NaN."""
        archive = HDF5SimLogArchive(out_dir)
        path = archive.write(cmpc_log)
        assert path.name == "cmpc.hdf5"
        assert np.all(np.isnan(archive.read_data(path, "agent_0/outer_inputs")))

    def test_truncated_log(self, out_dir, weak_chain, weak_design):
        """Test a log cut short at the first step is archived with its fatal record."""
        with pytest.raises(FatalInfeasible) as e:
            run(weak_chain, weak_design, np.array([20.0, 0.0, 0.0]), steps=3, N=HORIZON)
        archive = HDF5SimLogArchive(out_dir)
        path = archive.write(e.value.log)
        meta = archive.read_meta(path)
        assert meta["truncated"]
        assert meta["fatal"] == {"t": 0, "i": 0, "stage": "inner"}
        assert archive.read_data(path, "inputs").shape == (0, 3)

    def test_missing_dataset(self, out_dir, chain_log):
        """Test reading an absent dataset."""
        archive = HDF5SimLogArchive(out_dir)
        path = archive.write(chain_log)
        with pytest.raises(StorageError):
            archive.read_data(path, "agent_9/z")


class TestStringDatasets:
    """Tests for JSON and text stored as fixed-length byte strings."""

    @pytest.mark.parametrize("value", ["", "plain", "Ä ≤ ∞ naïve", {"margin": "inf", "check": "S + H inside Z"}])
    def test_size_matches_encoding(self, out_dir, value):
        """Test the dataset holds exactly the UTF-8 bytes of the value."""
        text = value if isinstance(value, str) else json.dumps(value, default=str, sort_keys=True)
        with h5py.File(out_dir / "strings.hdf5", "w") as f:
            ds = HDF5StringMixin.write_string(f, "value", value)
            assert ds.dtype.itemsize == max(len(text.encode("utf-8")), 1)
            assert HDF5StringMixin.read_string(f, "value") == text


class TestCSVExport:
    """Tests for the CSV export of closed-loop logs."""

    def test_header(self, chain_log):
        """Test the column layout."""
        assert csv_header(chain_log) == [
            "t",
            "x1",
            "x2",
            "x3",
            "u1",
            "u2",
            "u3",
            "status_1",
            "status_2",
            "status_3",
            "cost_1",
            "cost_2",
            "cost_3",
        ]

    def test_values_are_exact(self, out_dir, chain_log):
        """Test 17 significant digits restore every float bit for bit."""
        adapter = CSVLogAdapter(out_dir)
        path = adapter.write(chain_log)
        assert path.name == "chain.csv"
        header, data = adapter.read(path)
        assert header == csv_header(chain_log)
        assert data.shape == (20, 13)
        assert np.array_equal(data[:, 0], np.arange(20))
        assert np.array_equal(data[:, 1:4], chain_log.states[:-1])
        assert np.array_equal(data[:, 4:7], chain_log.inputs)
        assert np.array_equal(data[:, 7:10], chain_log.statuses)
        assert np.array_equal(data[:, 10:13], chain_log.stage_costs)

    def test_statuses_of_baseline(self, out_dir, dempc_log):
        """Test the status columns carry the integer codes."""
        adapter = CSVLogAdapter(out_dir)
        _, data = adapter.read(adapter.write(dempc_log))
        assert set(np.unique(data[:, 7:10])) <= {0.0, 2.0}

    def test_missing_and_empty(self, out_dir):
        """Test unreadable exports."""
        adapter = CSVLogAdapter(out_dir)
        with pytest.raises(StorageError):
            adapter.read(out_dir / "absent.csv")
        empty = out_dir / "empty.csv"
        empty.write_text("")
        with pytest.raises(StorageError):
            adapter.read(empty)


if __name__ == "__main__":
    pytest.main()
