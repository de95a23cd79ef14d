import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from wlsr import lightbank, synthetic  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    images, voc = synthetic.write_dataset(str(root), 12, seed=5, width=320, height=240,
                                          empty_every=6)
    return root, images, voc


@pytest.fixture(scope="session")
def small_bank(tmp_path_factory, small_dataset):
    _, images, _ = small_dataset
    from wlsr import pipeline
    out = tmp_path_factory.mktemp("small_bank")
    pipeline.cmd_build_bank(images, str(out), crops=20, seed=3)
    return str(out)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
