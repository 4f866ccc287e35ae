import sys

from tpng.cli.main import main

sys.exit(main())
