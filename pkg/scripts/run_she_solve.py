#!/usr/bin/env python3
"""Solve the mollified equation along an increasing projection-level
schedule with one fixed noise draw and report the convergence verdict.

Outputs trace.csv (level, value, stderr) and verdict.json.
Extra flags (e.g. --seed, --out) are forwarded to the runner.
"""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("she-solve", "she_solve.ini"))
