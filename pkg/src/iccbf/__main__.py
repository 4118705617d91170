import sys

from iccbf.cli import main

sys.exit(main())
