import sys

from thermocloak.harness.cli import main

sys.exit(main())
