import sys

from qnetsem.cli import main

sys.exit(main())
