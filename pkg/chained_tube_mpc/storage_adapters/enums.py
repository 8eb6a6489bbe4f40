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

from enum import Enum


class ArchiveCompression(Enum):
    """Enum for the compression names of archive options; numeric hdf5plugin filter ids are accepted besides."""

    none = "none"
    gzip = "gzip"
    szip = "szip"
    lzf = "lzf"


class ChunkMode(Enum):
    """Enum for the storage layout of archived arrays."""

    contiguous = "none"
    auto = "true"
    manual = "manual"


class CacheGroups(Enum):
    """Enum for design cache dataset names."""

    meta = "meta"
    report = "report"
    sets = "sets"
    subsystem = "subsystem_{index}"
