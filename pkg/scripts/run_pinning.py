#!/usr/bin/env python3
"""Pinning-model experiments: quenched free energy over a pinning-strength
grid, critical-point bracketing, and the Wick mean-one diagnostic for the
disorder weights.

Outputs free_energy.csv, scan.csv / bracket.json, and wick.json in
separate run directories.
"""

import sys

from _common import run

if __name__ == "__main__":
    rc = run("pinning-free-energy", "pinning_free_energy.ini")
    rc = rc or run("hc-scan", "hc_scan.ini")
    sys.exit(rc or run("wick-check", "wick_check.ini"))
