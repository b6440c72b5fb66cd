"""Shared helper for the experiment scripts: resolve a bundled config and
forward any extra command-line flags to the batch runner."""

import sys
from pathlib import Path

from shelab.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def run(kind: str, config_name: str) -> int:
    argv = [kind, "--config", str(CONFIG_DIR / config_name), *sys.argv[1:]]
    return main(argv)
