import sys

from vesselaug.cli import main

sys.exit(main())
