import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

DATA_DIR = HERE / "data"


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def fixture_pcap_path():
    return DATA_DIR / "fixture.pcap"
