import sys

from celltype_ot.cli.main import main

sys.exit(main())
