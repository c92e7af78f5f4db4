import sys

from cablewatch.cli import main

if __name__ == "__main__":
    sys.exit(main())
