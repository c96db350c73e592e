import sys
from pathlib import Path

# Make tests/oracles.py importable regardless of pytest rootdir handling.
sys.path.insert(0, str(Path(__file__).parent))
