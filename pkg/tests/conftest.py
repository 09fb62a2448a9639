from pathlib import Path

import numpy as np
import pytest

from arxschur.model import demo_model

MODELS = Path(__file__).resolve().parent.parent / "models"

# lines appended by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def demo():
    return demo_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def models_dir():
    return MODELS


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
