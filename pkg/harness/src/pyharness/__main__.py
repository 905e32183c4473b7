import sys

from pyharness.runner import main

sys.exit(main())
