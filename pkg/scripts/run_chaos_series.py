#!/usr/bin/env python3
"""Compute the second-moment chaos series term by term, classify its
convergence, and bracket the critical time by bisection on the classifier.

Outputs series.csv / summary.json and bracket.json.
"""

import sys

from _common import run

if __name__ == "__main__":
    rc = run("chaos-series", "chaos_series.ini")
    sys.exit(rc or run("tc-bracket", "chaos_series.ini"))
