import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEMO_DIR = os.path.join(REPO_ROOT, "demo")
GOLDEN_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")
DOCS_DIR = os.path.join(REPO_ROOT, "docs")


@pytest.fixture
def demo_dir() -> str:
    return DEMO_DIR


@pytest.fixture
def demo_csv() -> bytes:
    with open(os.path.join(DEMO_DIR, "superstore.csv"), "rb") as f:
        return f.read()


@pytest.fixture
def demo_dashboard_text() -> str:
    with open(os.path.join(DEMO_DIR, "dashboard.yaml"), encoding="utf-8") as f:
        return f.read()


@pytest.fixture
def demo_snapshot_text() -> str:
    with open(os.path.join(DEMO_DIR, "snapshot.yaml"), encoding="utf-8") as f:
        return f.read()
