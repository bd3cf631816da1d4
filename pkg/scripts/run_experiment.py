#!/usr/bin/env python3
"""Run the full seeds x controllers sweep; flags are forwarded to the CLI."""

import sys

from gpfl.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", *sys.argv[1:]]))
