"""
Shared scenario fixtures
"""
import copy
import json

import numpy as np
import pytest

from src.core.config import ScenarioConfig
from tests.helpers import BASE_SCENARIO


def _merge(doc, overrides):
    for section, values in overrides.items():
        doc.setdefault(section, {}).update(values)
    return doc


@pytest.fixture
def scenario_doc():
    """Factory for scenario documents with per-section overrides"""
    def _make(**overrides):
        return _merge(copy.deepcopy(BASE_SCENARIO), overrides)
    return _make


@pytest.fixture
def make_config(scenario_doc):
    def _make(**overrides):
        return ScenarioConfig.from_dict(scenario_doc(**overrides))
    return _make


@pytest.fixture
def scenario_file(tmp_path, scenario_doc):
    """Write a scenario document to disk and return its path"""
    def _write(name='scenario.json', **overrides):
        path = tmp_path / name
        path.write_text(json.dumps(scenario_doc(**overrides)))
        return path
    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
