from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

from trajsem.geo import load_regions, load_taxonomy
from trajsem.synthetic import write_city

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def example_dir(tmp_path) -> Path:
    """Writable copy of the worked-example inputs."""
    dst = tmp_path / "example"
    shutil.copytree(FIXTURES / "worked_example", dst)
    return dst


@pytest.fixture(scope="session")
def example_taxonomy():
    return load_taxonomy(FIXTURES / "worked_example" / "taxonomy.json")


@pytest.fixture(scope="session")
def example_registry():
    return load_regions(FIXTURES / "worked_example" / "regions.geojson")


@pytest.fixture(scope="session")
def city_dir(tmp_path_factory) -> Path:
    """Desk-scale synthetic corpus: 100 users, 50 regions, 5000 POIs."""
    return write_city(tmp_path_factory.mktemp("city"), n_regions=50, n_pois=5000, n_users=100, seed=1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.acceptance_lines():
        terminalreporter.write_line(line)
