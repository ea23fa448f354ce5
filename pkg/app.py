"""
repest entry point
Usage: python app.py count --frames ./frames --fps 30
"""
import sys

from repest.cli import main

if __name__ == "__main__":
    sys.exit(main())
