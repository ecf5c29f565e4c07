import sys

from densitycp.cli import main

sys.exit(main())
