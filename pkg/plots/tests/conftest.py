import sys
from pathlib import Path

# the figure scripts live one level up and import each other as plain modules
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
