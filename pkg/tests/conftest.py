"""
Shared fixtures for the relaxkit test suite
"""

import json
import sys
from pathlib import Path

import pytest

# Add parent directory to Python path so tests can import modules
ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from mechanisms import OrbachChannel, OrbachParams  # noqa: E402

CONFIG_DIR = ROOT / "configs"


@pytest.fixture
def toluene_config_path() -> str:
    return str(CONFIG_DIR / "toluene.json")


@pytest.fixture
def glass_config_path() -> str:
    return str(CONFIG_DIR / "cs2_s2cl2.json")


@pytest.fixture
def toluene_document(toluene_config_path):
    from config import load_config_document
    return load_config_document(toluene_config_path)


@pytest.fixture
def orbach_channel() -> OrbachChannel:
    return OrbachChannel(OrbachParams(prefactor_A=4.0e5, delta=60.0))


@pytest.fixture
def write_text(tmp_path):
    """Write a text fixture file under tmp_path and return its path"""
    def _write(name: str, content: str) -> str:
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def write_json(tmp_path):
    def _write(name: str, document) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)
    return _write
