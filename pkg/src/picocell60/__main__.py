import sys

from picocell60.cli import main

sys.exit(main())
