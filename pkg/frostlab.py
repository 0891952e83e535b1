#!/usr/bin/env python3
"""
Frostlab - numerical lab for discretized projection and incidence estimates
Run this to execute experiments: python3 frostlab.py run config.yml
"""

import sys

from src.cli import main

if __name__ == "__main__":
    if len(sys.argv) > 1 and sys.argv[1] == 'run':
        print("Frostlab")
        print("=" * 50)
    sys.exit(main())
