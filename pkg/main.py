#!/usr/bin/env python3
"""TreeReply - tree-structured response decoding from the command line."""

import sys

from ui.cli import main


if __name__ == "__main__":
    sys.exit(main())
