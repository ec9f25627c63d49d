import sys

from csnkit.cli import main

sys.exit(main())
