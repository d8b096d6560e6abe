import json

import pytest

from bsfobs.params import failing_parameters, nominal_parameters, save_config


@pytest.fixture
def nominal():
    return nominal_parameters()


@pytest.fixture
def failing():
    return failing_parameters()


@pytest.fixture
def nominal_file(tmp_path, nominal):
    path = tmp_path / "nominal.json"
    save_config(nominal, path)
    return path


@pytest.fixture
def failing_file(tmp_path, failing):
    path = tmp_path / "failing.json"
    save_config(failing, path)
    return path


@pytest.fixture
def write_json(tmp_path):
    def write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return write
