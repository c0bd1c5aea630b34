#!/usr/bin/env python3
"""
occufield launch script

    python run.py <subcommand> [options]
"""

import sys

from occufield.app import main

if __name__ == "__main__":
    sys.exit(main())
