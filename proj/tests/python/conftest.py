import json
import os
import pathlib

import pytest

SOURCE_DIR = pathlib.Path(os.environ.get("MINHET_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def source_dir():
    return SOURCE_DIR


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("MINHET_CLI")
    if not path or not pathlib.Path(path).exists():
        pytest.skip("MINHET_CLI not set")
    return path


@pytest.fixture(scope="session")
def schemas():
    from referencing import Registry, Resource

    config = json.loads((SOURCE_DIR / "schema" / "config.schema.json").read_text())
    summary = json.loads((SOURCE_DIR / "schema" / "summary.schema.json").read_text())
    registry = Registry().with_resource(config["$id"], Resource.from_contents(config))
    return config, summary, registry
