"""Print the median contraction per (embedder, n) on the calibration seeds.

The output is the table frozen in tests/test_acceptance.py; rerun this only
when the protocol itself changes.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from contraction_protocol import KINDS, SIZES, median_contraction  # noqa: E402


def main():
    table = {kind: {n: median_contraction(kind, n) for n in SIZES} for kind in KINDS}
    json.dump(table, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
