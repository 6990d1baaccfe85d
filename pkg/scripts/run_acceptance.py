"""Run the acceptance suite and print one line per criterion."""
import pathlib
import sys

import pytest

root = pathlib.Path(__file__).resolve().parent.parent
sys.exit(pytest.main([str(root / "tests" / "test_acceptance.py"), "-q"]))
