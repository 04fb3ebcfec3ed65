import json
from importlib import resources

import pytest

from loraplan.site import loads_site

_ACCEPTANCE = []


def record_acceptance(label, ok, detail=""):
    _ACCEPTANCE.append((label, ok, detail))


@pytest.fixture(scope="session")
def demo_text():
    return resources.files("loraplan").joinpath("data/demo_campus.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def demo_site(demo_text):
    return loads_site(demo_text)


@pytest.fixture(scope="session")
def demo_path(tmp_path_factory, demo_text):
    path = tmp_path_factory.mktemp("fixture") / "demo_campus.json"
    path.write_text(demo_text, encoding="utf-8")
    return path


def minimal_doc(**config):
    """10x10 grid, 10 m cells, one gateway in the middle, no obstructions."""
    return {
        "grid": {"cell_size_m": 10, "nx": 10, "ny": 10},
        "config": dict(config),
        "gateways": [{"id": "gw", "position": {"x": 50, "y": 50, "z": 20}}],
    }


def box(x0, y0, x1, y1):
    return [{"x": x0, "y": y0}, {"x": x1, "y": y0}, {"x": x1, "y": y1}, {"x": x0, "y": y1}]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
