import pytest
from facilitation.models.params import SaddlePair


@pytest.fixture
def base() -> SaddlePair:
    return SaddlePair(x0=1.0, x1=3.0)


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"
