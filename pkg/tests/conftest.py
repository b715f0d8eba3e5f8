import json
import sys
from pathlib import Path

import numpy as np
import pytest

from l2c import blackbox as bb
from l2c import counterfactual as cf
from l2c import datasets
from l2c import discretize as dz

HERE = Path(__file__).parent
ROOT = HERE.parent


@pytest.fixture(scope="session")
def frozen():
    return json.loads((HERE / "frozen_oracles.json").read_text())


@pytest.fixture(scope="session")
def synth():
    data = datasets.synthetic(500, seed=0)
    return datasets.split(data, seed=0)


@pytest.fixture(scope="session")
def synth_clf(synth):
    train, val, _ = synth
    return bb.train(train, val=val)


@pytest.fixture(scope="session")
def synth_schema(synth):
    train = synth[0]
    return dz.attach(train.schema, dz.fit_discretizer(train, dz.EQUAL_FREQUENCY))


@pytest.fixture(scope="session")
def trained_l2c(synth, synth_clf, synth_schema):
    model = cf.L2cModel(synth_schema, cf.L2cConfig(seed=0))
    model, hist = cf.train(model, synth[0], synth_clf)
    return model, hist


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
