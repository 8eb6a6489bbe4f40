# chained-tube-mpc - distributed tube model predictive control
# Copyright (C) 2023  OpenWeather
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

from chained_tube_mpc.errors import ValidationError
from chained_tube_mpc.storage_adapters.enums import ArchiveCompression, ChunkMode


@dataclass()
class HDF5CompressionOpts(object):
    """HDF5 compression options of the simulation archive.

    :param compression: filter name (``gzip``, ``lzf``, ``szip``) or an ``hdf5plugin`` filter id
    :param compression_opts: filter parameters

                             Depending on the filter they may be None, an integer or a tuple:

                             - ``gzip`` accepts a level 0-9,
                             - ``szip`` accepts a tuple of a string and an integer,
                             - ``lzf`` accepts nothing,
                             - ``hdf5plugin`` filters (e.g. ``hdf5plugin.Zstd().filter_id``) take their own tuples.
    """

    compression: Optional[Union[str, int]]
    compression_opts: Optional[Union[list, tuple, int]]

    def __post_init__(self) -> None:
        """Validate the filter and normalize its parameters to a tuple."""
        if self.compression is not None:
            if not isinstance(self.compression, (str, int)) or isinstance(self.compression, bool):
                raise ValidationError(f"Invalid compression type: {type(self.compression)}; str, int or None expected")
            if isinstance(self.compression, str) and not self.compression.strip():
                raise ValidationError(f"Invalid compression value: {self.compression!r}")
            if isinstance(self.compression, int) and self.compression < 0:
                raise ValidationError(f"Invalid compression filter id: {self.compression}")

        if self.compression_opts is None:
            return
        if self.compression is None:
            raise ValidationError("compression_opts given without a compression filter")
        if not isinstance(self.compression_opts, (list, tuple, int)) or isinstance(self.compression_opts, bool):
            raise ValidationError(
                f"Invalid compression_opts type: {type(self.compression_opts)}; list, tuple, int or None expected"
            )
        if isinstance(self.compression_opts, list):
            self.compression_opts = tuple(self.compression_opts)
        if not self.compression_opts and not isinstance(self.compression_opts, int):
            self.compression_opts = None
        if isinstance(self.compression_opts, int) and self.compression_opts < 0:
            raise ValidationError(f"Invalid compression level: {self.compression_opts}")

    @property
    def as_dict(self) -> dict:
        """Serialize self into a dictionary."""
        return {"compression": self.compression, "compression_opts": self.compression_opts}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(compression={self.compression}, compression_opts={self.compression_opts})"


@dataclass()
class HDF5Options(object):
    """Chunking and compression of the datasets written to simulation archives.

    :param chunks: None for contiguous storage, True for automatic chunking by HDF5,
                   or a tuple of integers giving the chunk shape of the time axis and the rest
    :param compression_opts: HDF5 filter pipeline configuration
    """

    chunks: Optional[Union[bool, Tuple[int, ...], List[int]]] = None
    compression_opts: Optional[HDF5CompressionOpts] = None

    def __post_init__(self) -> None:
        """Validate archive options."""
        if self.chunks is not None:
            if isinstance(self.chunks, bool):
                if not self.chunks:
                    raise ValidationError("chunks=False is not allowed; use None for contiguous storage")
            elif isinstance(self.chunks, (list, tuple)):
                self.chunks = tuple(self.chunks)
                if not self.chunks or not all(isinstance(i, int) and i > 0 for i in self.chunks):
                    raise ValidationError(f"Invalid chunks values: {self.chunks}; positive integers expected")
            else:
                raise ValidationError(f"Invalid chunks type: {type(self.chunks)}; None, True, list or tuple expected")

        if self.compression_opts is None:
            self.compression_opts = HDF5CompressionOpts(compression=None, compression_opts=None)
        elif not isinstance(self.compression_opts, HDF5CompressionOpts):
            raise ValidationError(
                f"Invalid compression_opts type: {type(self.compression_opts)}; HDF5CompressionOpts expected"
            )

    @classmethod
    def from_dict(cls, options: Optional[Dict[str, Any]]) -> "HDF5Options":
        """Build options from their JSON form (the inverse of :attr:`as_dict`).

        :param options: ``{"chunks": {"mode": ..., "size": ...}, "compression": {"compression": ..., "options": [...]}}``
        """
        if not options:
            return cls()
        chunks_entry = options.get("chunks") or {}
        try:
            mode = ChunkMode(chunks_entry.get("mode", ChunkMode.contiguous.value))
        except ValueError:
            raise ValidationError(f"Unknown chunks mode: {chunks_entry['mode']!r}")
        if mode is ChunkMode.manual:
            chunks: Optional[Union[bool, Tuple[int, ...]]] = tuple(chunks_entry["size"])
        elif mode is ChunkMode.auto:
            chunks = True
        else:
            chunks = None

        entry = options.get("compression") or {}
        name = entry.get("compression")
        raw = entry.get("options") or []
        params: List[Union[int, str]] = []
        for opt in raw:
            try:
                params.append(int(opt))
            except ValueError:
                params.append(opt)

        compression: Optional[Union[str, int]]
        opts: Optional[Union[tuple, int]]
        if not name or name == ArchiveCompression.none.value:
            compression, opts = None, None
        elif name == ArchiveCompression.gzip.value:
            compression, opts = name, (params[0] if params else None)  # type: ignore[assignment]
        elif name == ArchiveCompression.szip.value:
            compression, opts = name, (tuple(params) if params else None)
        elif name == ArchiveCompression.lzf.value:
            if params:
                raise ValidationError("LZF filter does not accept any options")
            compression, opts = name, None
        else:
            try:
                compression = int(name)
            except ValueError:
                raise ValidationError(f"Unknown compression filter: {name!r}")
            opts = tuple(params) if params else None
        return cls(chunks=chunks, compression_opts=HDF5CompressionOpts(compression=compression, compression_opts=opts))

    @property
    def as_dict(self) -> dict:
        """Serialize options into their JSON form."""
        compression = self.compression_opts.compression  # type: ignore[union-attr]
        opts = self.compression_opts.compression_opts  # type: ignore[union-attr]
        if compression is None:
            entry = {"compression": ArchiveCompression.none.value, "options": []}
        else:
            values = [] if opts is None else (list(opts) if isinstance(opts, (list, tuple)) else [opts])
            entry = {"compression": str(compression), "options": [str(v) for v in values]}

        if isinstance(self.chunks, tuple):
            chunks: dict = {"mode": ChunkMode.manual.value, "size": list(self.chunks)}
        elif self.chunks:
            chunks = {"mode": ChunkMode.auto.value}
        else:
            chunks = {"mode": ChunkMode.contiguous.value}
        return {"chunks": chunks, "compression": entry}

    def dataset_kwargs(self, shape: Tuple[int, ...]) -> dict:
        """Keyword arguments for ``h5py.Group.create_dataset``.

        Chunk tuples shorter than the dataset rank are padded with the full
        extent of the remaining axes; scalar datasets are stored contiguously.

        :param shape: dataset shape
        """
        compression = self.compression_opts.compression  # type: ignore[union-attr]
        if not shape or 0 in shape:
            return {}
        chunks = self.chunks
        if isinstance(chunks, tuple):
            chunks = tuple(min(c, s) for c, s in zip(chunks, shape)) + tuple(shape[len(chunks) :])
        kwargs: dict = {}
        if chunks is not None:
            kwargs["chunks"] = chunks
        if compression is not None:
            kwargs["compression"] = compression
            kwargs["compression_opts"] = self.compression_opts.compression_opts  # type: ignore[union-attr]
        return kwargs

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(chunks={self.chunks}, compression_opts={self.compression_opts})"
