import json
from pathlib import Path

import pytest

from careflow.gateway import EnvironmentConfig

ASSETS = Path(__file__).resolve().parent.parent / "assets"


@pytest.fixture
def assets_dir() -> Path:
    return ASSETS


@pytest.fixture
def env_config(tmp_path) -> EnvironmentConfig:
    """Full configuration over the shipped corpus, journaled into tmp."""
    return EnvironmentConfig(
        cigs_dir=ASSETS / "cigs",
        master_path=ASSETS / "cigs" / "master.json",
        kdom_rules_path=ASSETS / "kdom" / "rules.json",
        interaction_kb_path=ASSETS / "kb" / "interactions.csv",
        external_data_path=ASSETS / "stubs.json",
        journal_path=tmp_path / "journal.ndjson",
    )


def guideline_from(doc: dict):
    from careflow.model import parse_guideline

    return parse_guideline(json.dumps(doc))


@pytest.fixture
def make_guideline():
    return guideline_from
