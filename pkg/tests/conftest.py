import json
from pathlib import Path

import pytest

from csnkit.scene import SceneState

GOLDEN = Path(__file__).parent / "golden"

# criterion number -> (status, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def left_turn_scene_dict() -> dict:
    return json.loads((GOLDEN / "left_turn_scene.json").read_text())


@pytest.fixture(scope="session")
def left_turn_scene(left_turn_scene_dict) -> SceneState:
    return SceneState.from_dict(left_turn_scene_dict)


def golden_lines(name: str) -> list[str]:
    return (GOLDEN / name).read_text().splitlines()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {detail}")
