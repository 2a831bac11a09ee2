"""Entry point for msdiff."""

import sys

from msdiff.cli import main  # pragma: no cover

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
