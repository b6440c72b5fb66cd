#!/usr/bin/env python3
"""Check the mean-one and second-moment identities of the projected
solution across chaos levels.

Outputs moments.csv with both moment estimators and their sigma distance.
"""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("she-moments", "she_moments.ini"))
