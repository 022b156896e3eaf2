import sys

from adiakit.main import main

sys.exit(main())
