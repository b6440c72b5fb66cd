#!/usr/bin/env python3
"""Estimate the mollified self-energy along a shrinking-width schedule and
run the divergence probe that classifies the small-width limit.

Outputs levels.csv / summary.json (self-energy) and probe.csv /
classification.json (divergence probe) in separate run directories.
"""

import sys

from _common import run

if __name__ == "__main__":
    rc = run("self-energy", "self_energy.ini")
    sys.exit(rc or run("divergence-probe", "divergence_probe.ini"))
