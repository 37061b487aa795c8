import sys

from harq_mac.cli import main

sys.exit(main())
