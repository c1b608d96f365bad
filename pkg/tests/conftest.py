import pytest

from cellspace import default_config, tiny_config
from cellspace.space import config_to_dict


@pytest.fixture(scope="session")
def default_cfg():
    return default_config()


@pytest.fixture(scope="session")
def tiny_cfg():
    return tiny_config()


@pytest.fixture()
def tiny_dict(tiny_cfg):
    """Mutable copy of the tiny config for building variants."""
    return config_to_dict(tiny_cfg)
