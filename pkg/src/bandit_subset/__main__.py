import sys

from bandit_subset.cli import main

sys.exit(main())
