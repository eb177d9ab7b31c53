import sys

from cogplan.harness.cli import main

sys.exit(main())
