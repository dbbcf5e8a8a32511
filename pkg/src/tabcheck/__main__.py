import sys

from tabcheck.cli import main

sys.exit(main())
