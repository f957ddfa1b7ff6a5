#!/usr/bin/env python3

"""Command-line entrypoint.

Usage example:
    python3 despeckle.py simulate --gt mosaic --looks 1 --out noisy.mulg
    python3 despeckle.py despeckle --in noisy.mulg --out clean.mulg
    python3 despeckle.py evaluate --est clean.mulg --ref noisy.gt.mulg
"""

from mulog.cli import app

if __name__ == "__main__":
    app()
