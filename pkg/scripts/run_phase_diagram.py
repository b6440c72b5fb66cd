#!/usr/bin/env python3
"""Tabulate the regime flags over an (alpha, H) grid.

Outputs phase_diagram.csv with the solvability flags and the
weak/strong-disorder classifier flags at each grid point.
"""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("phase-diagram", "phase_diagram.ini"))
