"""Run the acceptance suite and show one verdict line per criterion."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    cmd = [sys.executable, "-m", "pytest", "tests/test_acceptance.py", "-s", "-q", *sys.argv[1:]]
    sys.exit(subprocess.call(cmd, cwd=ROOT))
