#!/usr/bin/env python3
"""
Batch runner for the weak-boundary robustness experiments.

    python run.py robustness --config configs/robustness_q25.ini --epsilon_list 0.05,1.0
"""

import sys

from app.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
