#!/usr/bin/env python3
"""
Run a landslide experiment from a source checkout.
"""
import sys

from app.experiments.cli import main

if __name__ == "__main__":
    sys.exit(main())
