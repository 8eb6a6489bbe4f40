import os

import numpy as np
import pytest

from chained_tube_mpc.enums import ControllerType, SolveStatus
from chained_tube_mpc.errors import ValidationError
from chained_tube_mpc.runtime import SimLog, StepRecord
from chained_tube_mpc.storage_adapters import ArchiveCompression, ChunkMode
from chained_tube_mpc.storage_adapters.hdf5 import HDF5CompressionOpts, HDF5Options
from chained_tube_mpc.storage_adapters.hdf5.hdf5_storage_adapter import HDF5SimLogArchive


def _long_log(steps: int = 2000, agents: int = 3) -> SimLog:
    log = SimLog(ControllerType.dempc, (1,) * agents, (1,) * agents, 5, 1, steps)
    x = np.zeros(agents)
    for t in range(steps):
        record = StepRecord(
            t=t,
            x=x,
            u=np.zeros(agents),
            inner=(None,) * agents,
            outer=(None,) * agents,
            inner_status=(SolveStatus.saturated,) * agents,
            outer_status=(SolveStatus.skipped,) * agents,
            stage_costs=(0.0,) * agents,
        )
        log.append(record, x)
    return log


class TestOptions:
    @pytest.mark.parametrize(
        "chunks",
        [
            "",
            " ",
            "       ",
            "1, 2",
            False,
            0,
            -1,
            1,
            -0.1,
            0.1,
            {},
            set(),
            {1, 2, 3},
            {1: 1, 2: 2, 3: 3},
            [],
            tuple(),
            ["1", "2"],
            ("1", "2"),
            (0, 2),
        ],
    )
    def test_archive_options_chunks_validation_raises(self, chunks):
        """Test HDF5Options chunks validation."""
        with pytest.raises(ValidationError):
            assert HDF5Options(chunks)

    @pytest.mark.parametrize(
        "comp_opts",
        [
            "",
            " ",
            "       ",
            "1, 2",
            True,
            False,
            0,
            -1,
            1,
            -0.1,
            0.1,
            {},
            set(),
            {1, 2, 3},
            {1: 1, 2: 2, 3: 3},
            [],
            tuple(),
            ["1", "2"],
            ("1", "2"),
        ],
    )
    def test_archive_options_compression_opts_validation_raises(self, comp_opts):
        """Test HDF5Options compression_opts validation."""
        with pytest.raises(ValidationError):
            assert HDF5Options(compression_opts=comp_opts)

    @pytest.mark.parametrize(
        "compression",
        [
            "",
            " ",
            "       ",
            True,
            False,
            -1,
            -0.1,
            0.1,
            {},
            set(),
            {1, 2, 3},
            {1: 1, 2: 2, 3: 3},
            [],
            tuple(),
            ["1", "2"],
            ("1", "2"),
        ],
    )
    def test_compression_opts_compression_validation_raises(self, compression):
        """Test CompressionOpts compression validation."""
        with pytest.raises(ValidationError):
            assert HDF5CompressionOpts(compression=compression, compression_opts=None)

    @pytest.mark.parametrize(
        ("compression", "comp_opts"),
        [
            (None, 9),
            (-1, 9),
            ("gzip", ""),
            ("gzip", " "),
            ("gzip", "       "),
            ("gzip", True),
            ("gzip", False),
            ("gzip", -1),
            ("gzip", -0.1),
            ("gzip", 0.1),
            ("gzip", {}),
            ("gzip", set()),
            ("gzip", {1, 2, 3}),
            ("gzip", {1: 1, 2: 2, 3: 3}),
        ],
    )
    def test_compression_opts_compression_opts_validation_raises(self, compression, comp_opts):
        """Test CompressionOpts compression_opts validation."""
        with pytest.raises(ValidationError):
            assert HDF5CompressionOpts(compression=compression, compression_opts=comp_opts)

    def test_empty_filter_parameters_become_none(self):
        """Test an empty parameter list means the filter defaults."""
        assert HDF5CompressionOpts("gzip", []).compression_opts is None
        assert HDF5CompressionOpts("szip", ["nn", 8]).compression_opts == ("nn", 8)

    @pytest.mark.parametrize(
        "options",
        [
            HDF5Options(),
            HDF5Options(True, HDF5CompressionOpts("lzf", None)),
            HDF5Options((5,), HDF5CompressionOpts("gzip", 4)),
            HDF5Options((10, 1), HDF5CompressionOpts("szip", ("nn", 8))),
            HDF5Options(True, HDF5CompressionOpts(32015, (3,))),
        ],
    )
    def test_options_dict_form(self, options):
        """Test the config file form restores the options."""
        assert HDF5Options.from_dict(options.as_dict) == options

    @pytest.mark.parametrize(
        "data",
        [
            {"compression": {"compression": "lzf", "options": ["1"]}},
            {"compression": {"compression": "brotli", "options": []}},
            {"chunks": {"mode": "false"}},
            {"chunks": {"mode": "auto"}},
        ],
    )
    def test_options_dict_form_invalid(self, data):
        """Test unknown filters and parameters for LZF are rejected."""
        with pytest.raises(ValidationError):
            HDF5Options.from_dict(data)

    @pytest.mark.parametrize(
        "mode,chunks",
        [(ChunkMode.contiguous, None), (ChunkMode.auto, True), (ChunkMode.manual, (8, 2))],
    )
    def test_chunk_modes(self, mode, chunks):
        """Test every chunk mode selects its layout and is written back under the same name."""
        entry = {"mode": mode.value, "size": [8, 2]} if mode is ChunkMode.manual else {"mode": mode.value}
        options = HDF5Options.from_dict({"chunks": entry})
        assert options.chunks == chunks
        assert options.as_dict["chunks"]["mode"] == mode.value
        assert options.as_dict["compression"]["compression"] == ArchiveCompression.none.value

    def test_dataset_kwargs(self):
        """Test chunk shapes are clipped and padded to the dataset."""
        options = HDF5Options((5,), HDF5CompressionOpts("gzip", 4))
        assert options.dataset_kwargs((20, 3)) == {"chunks": (5, 3), "compression": "gzip", "compression_opts": 4}
        assert options.dataset_kwargs((2,))["chunks"] == (2,)
        assert options.dataset_kwargs((0, 3)) == {}
        assert options.dataset_kwargs(()) == {}
        assert HDF5Options().dataset_kwargs((20, 3)) == {}

    def test_archive_is_compressed(self, root_path):
        """Test gzip shrinks an archive of a long run."""
        log = _long_log()
        plain = HDF5SimLogArchive(root_path / "plain").write(log)
        compressed = HDF5SimLogArchive(
            root_path / "compressed",
            HDF5Options(chunks=(500,), compression_opts=HDF5CompressionOpts(compression="gzip", compression_opts=9)),
        ).write(log)
        assert os.path.getsize(plain) > os.path.getsize(compressed)
        data = HDF5SimLogArchive(root_path / "compressed").read_data(compressed, "agent_2/inner_states")
        assert data.shape == (2000, 6, 1)
        assert np.all(np.isnan(data))


if __name__ == "__main__":
    pytest.main()
