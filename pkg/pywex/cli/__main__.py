import sys

from pywex.cli import main

sys.exit(main())
