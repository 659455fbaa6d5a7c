"""Shared fixtures: builtin systems and a CLI runner."""

import json
import subprocess
import sys

import numpy as np
import pytest

from filippov_lab.catalog import get_builtin


@pytest.fixture(scope="session")
def reduced_4d():
    return get_builtin("paper-4d")


@pytest.fixture(scope="session")
def c10_full():
    return get_builtin("paper-planar-c10")


@pytest.fixture(scope="session")
def c10_reduced():
    return get_builtin("paper-planar-c10-reduced")


@pytest.fixture(scope="session")
def run_cli():
    """Invoke the installed CLI in a subprocess and capture everything."""

    def run(*args, cwd=None):
        proc = subprocess.run(
            [sys.executable, "-m", "filippov_lab", *map(str, args)],
            capture_output=True,
            text=True,
            cwd=cwd,
            timeout=600,
        )
        return proc

    return run


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
