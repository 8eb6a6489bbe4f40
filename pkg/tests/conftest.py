import logging
import platform
import shutil

from concurrent.futures import ThreadPoolExecutor
from multiprocessing import cpu_count
from pathlib import Path

import pytest


logging.basicConfig(level="ERROR")

pytest_plugins = [
    "tests.plugins.geometry",
    "tests.plugins.systems",
    "tests.plugins.designs",
    "tests.plugins.runtime",
]


@pytest.fixture()
def workers() -> int:
    """Get reduced number of threads."""
    return max(cpu_count() // 2, 2)


@pytest.fixture()
def executor(workers: int) -> ThreadPoolExecutor:
    """Creates thread executor."""
    with ThreadPoolExecutor(workers) as pool:
        yield pool


@pytest.fixture(scope="session")
def root_path(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Returns root of test outputs.

    :param tmp_path_factory:  Temporary directory factory
    """
    directory = tmp_path_factory.mktemp("test", numbered=False)
    yield directory
    if platform.system().lower() == "linux":
        path = directory.parents[0]
        if directory.exists():
            shutil.rmtree(path)


@pytest.fixture()
def out_dir(tmp_path: Path) -> Path:
    """Fresh output directory of one test.

    :param tmp_path: pytest temporary directory
    """
    directory = tmp_path / "out"
    directory.mkdir()
    return directory
