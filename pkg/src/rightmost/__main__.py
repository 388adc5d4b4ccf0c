import sys

from rightmost.cli import main

sys.exit(main())
