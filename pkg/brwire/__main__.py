"""Runs the command line interface."""

from brwire.cli import main

if __name__ == "__main__":
    # python -m brwire
    main()
