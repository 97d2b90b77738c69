# main entry point for contend2

import sys

from contend2.cli import main

if __name__ == "__main__":
    sys.exit(main())
