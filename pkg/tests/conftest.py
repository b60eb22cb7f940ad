import json
from pathlib import Path

import pytest

from packlab.recipe import parse_recipe
from packlab.sampler import import_experiment

DATA = Path(__file__).parent / "data"


def load_fig7_experiment():
    doc = json.loads((DATA / "fig7_experiment.json").read_text())
    doc["recipe"] = json.loads((DATA / doc.pop("recipe_file")).read_text())
    return import_experiment(json.dumps(doc))


@pytest.fixture(scope="session")
def fig7_config():
    return load_fig7_experiment()


def make_recipe(**overrides) -> str:
    """A small valid box recipe document, overridable per test."""
    doc = {
        "name": "test",
        "volume": {"mode": "box3d", "extents": [100, 100, 100]},
        "defaults": {"grid_spacing": 10},
        "ingredients": [{"name": "A", "radius": 10, "count": 5}],
    }
    doc.update(overrides)
    return json.dumps(doc)


@pytest.fixture
def box_recipe():
    return parse_recipe(make_recipe())
