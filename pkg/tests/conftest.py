import os
import sys

# Make tests/oracles.py importable regardless of invocation directory.
sys.path.insert(0, os.path.dirname(__file__))
