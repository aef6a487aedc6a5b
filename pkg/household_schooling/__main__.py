import sys
from household_schooling.cli import main

sys.exit(main())
