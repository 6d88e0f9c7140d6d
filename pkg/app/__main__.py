import sys

from app.harness.cli import main


sys.exit(main())
