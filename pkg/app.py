import sys

from eckhaus_kdv.cli import main

if __name__ == "__main__":
    sys.exit(main())
